#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chainstate/assets.hpp"
#include "chainstate/error.hpp"
#include "chainstate/harness.hpp"

namespace fs = std::filesystem;
using namespace chainstate;

namespace {

int print_summary(const harness::RunSummary& s, const fs::path& out_dir) {
    std::cout << s.report.text;
    std::cout << "cells run: " << s.cells << ", skipped: " << s.skipped << ", errors: " << s.errors << "\n";
    std::cout << "traces and reports in " << out_dir.string() << "\n";
    return s.cells > 0 && s.errors == s.cells ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chainstate: batch runner for chain-of-states text agents"};
    app.require_subcommand(1);

    std::string config_path;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run every (variant, world) cell of a config");
    run->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    run->add_flag("-q,--quiet", quiet, "No per-episode progress");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Recompute metrics from a results directory");
    report->add_option("dir", report_dir, "Results directory")->required();

    std::string record_config;
    auto* record = app.add_subcommand("replay-record", "Run the http backend while recording every completion");
    record->add_option("--config", record_config, "JSON run config")->required()->check(CLI::ExistingFile);

    std::string env_name;
    int count = 0;
    std::uint64_t seed = 1;
    std::string out_dir = "worlds";
    auto* gen = app.add_subcommand("gen-worlds", "Write generated household worlds or textcraft tasks");
    gen->add_option("--env", env_name, "household or textcraft")->required();
    gen->add_option("--count", count, "Number of worlds")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "First seed");
    gen->add_option("--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = harness::load_config(config_path);
            auto summary = harness::run(config, quiet ? nullptr : &std::cerr);
            return print_summary(summary, config.output_dir);
        }
        if (*record) {
            auto config = harness::load_config(record_config);
            if (config.backend.kind != harness::BackendConfig::Kind::Http)
                throw Error(ErrorKind::Validation, "replay-record needs an http backend");
            auto summary = harness::record(config, &std::cerr);
            std::cout << "recorded into " << config.backend.store.string() << "\n";
            return print_summary(summary, config.output_dir);
        }
        if (*report) {
            auto result = harness::report(report_dir);
            harness::write_report(report_dir, result);
            std::cout << result.text;
            return 0;
        }
        if (*gen) {
            auto files = harness::gen_worlds(harness::parse_env_kind(env_name), count, seed, out_dir,
                                             assets::default_data_dir());
            for (const auto& f : files) std::cout << f.string() << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/backend.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/eval.hpp"

namespace chainstate::harness {

enum class EnvKind { Household, Textcraft };

Dialect dialect_of(EnvKind env);

struct BackendConfig {
    enum class Kind { Oracle, Http, Replay };
    Kind kind = Kind::Oracle;
    backend::HttpConfig http;
    std::filesystem::path store;   // replay store; also the record target for replay-record
    backend::ReplayMode mode = backend::ReplayMode::ByStep;
};

struct WorldSet {
    bool bundled = true;
    std::vector<std::uint64_t> seeds;            // generated worlds/tasks
    std::vector<std::filesystem::path> files;    // household world documents
};

struct RunConfig {
    EnvKind environment = EnvKind::Household;
    WorldSet worlds;
    std::vector<AgentVariant> variants;
    BackendConfig backend;
    std::optional<int> max_steps;
    bool adapt = false;
    int d_max = 2;
    std::filesystem::path output_dir = "out";
    int parallelism = 1;
    std::size_t max_prompt_chars = 0;
    codec::TruncationPolicy truncation = codec::TruncationPolicy::DropOldestSteps;
    bool append = false;
    bool move_to_syntax = false;
    std::filesystem::path data_dir;

    /// Throws Error(Validation).
    void validate() const;
};

/// Paths beginning with "@data/" resolve against the data directory; other
/// relative paths against `base`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = ".");
RunConfig load_config(const std::filesystem::path& path);

struct ReportResult {
    std::vector<eval::MetricsReport> reports;
    int warnings = 0;
    int files = 0;
    std::string text;
    nlohmann::ordered_json json;
};

struct RunSummary {
    int cells = 0;
    int skipped = 0;   // already present under append
    int errors = 0;    // cells that ended in an exception
    ReportResult report;
};

/// Runs every (variant, world) cell, one JSONL file per episode under
/// output_dir/<variant>/, then writes report.txt and report.json. Progress
/// goes to `log` when given.
RunSummary run(const RunConfig& config, std::ostream* log = nullptr);

/// Same, with every model call recorded into config.backend.store.
RunSummary record(const RunConfig& config, std::ostream* log = nullptr);

/// Recomputes metrics from the trace files under `dir` alone. Corrupt lines
/// are skipped and counted. Throws Error(EmptyInput) when no episode is found.
ReportResult report(const std::filesystem::path& dir);

void write_report(const std::filesystem::path& dir, const ReportResult& result);

/// Writes `count` generated household worlds (seeds seed..seed+count-1) or
/// a textcraft task list into `out_dir`; returns the files written.
std::vector<std::filesystem::path> gen_worlds(EnvKind env, int count, std::uint64_t seed,
                                              const std::filesystem::path& out_dir,
                                              const std::filesystem::path& data_dir);

EnvKind parse_env_kind(std::string_view text);

}  // namespace chainstate::harness

#include "chainstate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "chainstate/adapt.hpp"
#include "chainstate/agent.hpp"
#include "chainstate/assets.hpp"
#include "chainstate/error.hpp"
#include "chainstate/household.hpp"
#include "chainstate/strings.hpp"
#include "chainstate/textcraft.hpp"

namespace chainstate::harness {

namespace fs = std::filesystem;

namespace {

Error invalid(const std::string& msg) { return Error(ErrorKind::Validation, msg); }

fs::path resolve(const std::string& text, const fs::path& base, const fs::path& data) {
    constexpr std::string_view kData = "@data/";
    if (text.rfind(kData, 0) == 0) return data / text.substr(kData.size());
    fs::path p(text);
    return p.is_absolute() ? p : base / p;
}

std::string dir_name(const AgentVariant& v) {
    auto name = v.display_name();
    for (auto& c : name)
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    return name;
}

AgentVariant parse_variant(const nlohmann::json& j, Dialect dialect) {
    if (!j.is_object()) throw invalid("variant entries must be objects");
    AgentVariant v;
    v.name = j.value("name", std::string());
    v.include_goal = j.value("goal", true);
    v.include_state = j.value("state", true);
    v.include_thought = j.value("thought", true);
    v.format = parse_format(j.value("format", std::string("text")));
    v.track_visited = j.value("track_visited", false);
    v.dialect = j.contains("dialect") ? parse_dialect(j["dialect"].get<std::string>()) : dialect;
    return v;
}

// One (variant, world) pair.
struct Cell {
    std::size_t variant = 0;
    std::size_t world = 0;
};

// Everything a cell needs, prepared before any worker starts.
struct Plan {
    std::vector<household::WorldSpec> worlds;
    textcraft::RecipeBook book;
    std::vector<textcraft::CraftTask> tasks;
    std::map<household::TaskKind, codec::FewShotSet> household_shots;
    codec::FewShotSet textcraft_shots;
    std::optional<adapt::PlannerPrompt> planner;

    std::size_t size() const { return worlds.empty() ? tasks.size() : worlds.size(); }
};

Plan prepare(const RunConfig& c) {
    Plan p;
    if (c.environment == EnvKind::Household) {
        if (!c.worlds.files.empty()) {
            for (const auto& f : c.worlds.files) p.worlds.push_back(household::load_world(f));
        } else if (!c.worlds.seeds.empty()) {
            for (auto s : c.worlds.seeds) p.worlds.push_back(household::generate_world(s, household::kind_for_seed(s)));
        } else {
            p.worlds = assets::bundled_worlds(c.data_dir);
        }
        for (const auto& w : p.worlds)
            if (!p.household_shots.count(w.task.kind))
                p.household_shots[w.task.kind] = assets::household_few_shot(c.data_dir, w.task.kind);
    } else {
        p.book = assets::bundled_recipe_book(c.data_dir);
        if (!c.worlds.seeds.empty()) {
            for (auto s : c.worlds.seeds) p.tasks.push_back(textcraft::generate_task(p.book, 2 + static_cast<int>(s % 3), s));
        } else {
            p.tasks = assets::bundled_textcraft_tasks(c.data_dir);
        }
        p.textcraft_shots = assets::textcraft_few_shot(c.data_dir);
    }
    if (c.adapt) p.planner = assets::planner_prompt(c.data_dir, dialect_of(c.environment));
    if (p.size() == 0) throw invalid("world set is empty");
    return p;
}

std::unique_ptr<Environment> make_env(const RunConfig& c, const Plan& p, std::size_t i) {
    if (c.environment == EnvKind::Household) {
        household::EnvOptions o;
        o.move_to_syntax = c.move_to_syntax;
        o.max_steps = c.max_steps.value_or(agent::default_max_steps(Dialect::Household));
        return std::make_unique<household::HouseholdEnv>(p.worlds[i], o);
    }
    textcraft::EnvOptions o;
    o.max_steps = c.max_steps.value_or(agent::default_max_steps(Dialect::Textcraft));
    return std::make_unique<textcraft::TextcraftEnv>(p.book, p.tasks[i], o);
}

const codec::FewShotSet& shots_for(const RunConfig& c, const Plan& p, std::size_t i) {
    if (c.environment == EnvKind::Household) return p.household_shots.at(p.worlds[i].task.kind);
    return p.textcraft_shots;
}

std::string cell_env_id(const Plan& p, std::size_t i) {
    return p.worlds.empty() ? p.tasks[i].id : p.worlds[i].id;
}

void write_atomic(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string run_cell(const RunConfig& c, const Plan& p, const AgentVariant& v, std::size_t i,
                     backend::ModelBackend* shared) {
    auto env = make_env(c, p, i);
    int max_steps = env->default_max_steps();
    std::unique_ptr<backend::ModelBackend> own;
    backend::ModelBackend* model = shared;
    if (!model) {
        own = std::make_unique<backend::OracleBackend>(*env, v);
        model = own.get();
    }
    agent::EpisodeOptions opts;
    opts.episode_id = dir_name(v) + "/" + env->id();
    opts.max_prompt_chars = c.max_prompt_chars;
    opts.truncation = c.truncation;
    opts.max_model_len = c.backend.http.max_model_len;

    std::ostringstream out;
    const auto& shots = shots_for(c, p, i);
    if (c.adapt) {
        adapt::AdaptOptions ao;
        ao.d_max = c.d_max;
        ao.max_steps = max_steps;
        ao.episode = opts;
        auto task = agent::extract_goal(env->initial_observation(), env->dialect());
        auto result = adapt::run_adapt(task, *env, v, *model, *model, shots, *p.planner, ao);
        adapt::write_tree(out, result, v, env->id(), env->seed(), max_steps);
    } else {
        auto result = agent::run_episode(*env, v, *model, shots, max_steps, opts);
        agent::write_episode(out, result, v);
    }
    return out.str();
}

std::string failed_cell(const Plan& p, const AgentVariant& v, std::size_t i, int max_steps, const std::string& what) {
    agent::EpisodeResult r;
    r.env_id = cell_env_id(p, i);
    r.seed = p.worlds.empty() ? p.tasks[i].seed : p.worlds[i].seed;
    r.max_steps = max_steps;
    r.termination = agent::Termination::BackendError;
    agent::StepRecord rec;
    rec.step = 1;
    rec.error = what;
    r.records.push_back(rec);
    std::ostringstream out;
    agent::write_episode(out, r, v);
    return out.str();
}

RunSummary execute(const RunConfig& c, backend::ModelBackend* shared, std::ostream* log) {
    c.validate();
    auto plan = prepare(c);

    if (fs::exists(c.output_dir) && !fs::is_directory(c.output_dir))
        throw invalid(c.output_dir.string() + " is not a directory");
    if (fs::exists(c.output_dir) && !fs::is_empty(c.output_dir) && !c.append)
        throw invalid("output directory " + c.output_dir.string() + " is not empty; set \"append\" to continue a run");
    fs::create_directories(c.output_dir);

    std::vector<Cell> cells;
    RunSummary summary;
    for (std::size_t vi = 0; vi < c.variants.size(); ++vi) {
        fs::create_directories(c.output_dir / dir_name(c.variants[vi]));
        for (std::size_t wi = 0; wi < plan.size(); ++wi) {
            auto path = c.output_dir / dir_name(c.variants[vi]) / (cell_env_id(plan, wi) + ".jsonl");
            if (c.append && fs::exists(path)) {
                ++summary.skipped;
                continue;
            }
            cells.push_back({vi, wi});
        }
    }
    summary.cells = static_cast<int>(cells.size());

    std::atomic<std::size_t> next{0};
    std::atomic<int> errors{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) {
            const auto& cell = cells[k];
            const auto& v = c.variants[cell.variant];
            auto env_id = cell_env_id(plan, cell.world);
            std::string content;
            try {
                content = run_cell(c, plan, v, cell.world, shared);
            } catch (const std::exception& e) {
                ++errors;
                int budget = c.max_steps.value_or(agent::default_max_steps(dialect_of(c.environment)));
                content = failed_cell(plan, v, cell.world, budget, e.what());
            }
            write_atomic(c.output_dir / dir_name(v) / (env_id + ".jsonl"), content);
            if (log) {
                std::lock_guard lock(log_mutex);
                *log << "[" << (k + 1) << "/" << cells.size() << "] " << v.display_name() << " " << env_id << "\n";
            }
        }
    };
    int threads = std::max(1, std::min<int>(c.parallelism, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    summary.errors = errors;

    summary.report = report(c.output_dir);
    write_report(c.output_dir, summary.report);
    return summary;
}

// Accumulated per (variant, dialect) while scanning trace files.
struct Group {
    AgentVariant variant;
    std::string environment;
    std::vector<eval::EpisodeSummary> episodes;
    std::vector<agent::StepRecord> records;
    std::optional<eval::AdaptStats> adapt;
};

}  // namespace

Dialect dialect_of(EnvKind env) { return env == EnvKind::Household ? Dialect::Household : Dialect::Textcraft; }

EnvKind parse_env_kind(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    if (t == "household" || t == "alfworld") return EnvKind::Household;
    if (t == "textcraft") return EnvKind::Textcraft;
    throw invalid("unknown environment '" + std::string(text) + "'");
}

void RunConfig::validate() const {
    if (variants.empty()) throw invalid("no variants configured");
    auto want = dialect_of(environment);
    for (const auto& v : variants)
        if (v.dialect != want)
            throw invalid("variant " + v.display_name() + " uses the " + std::string(to_string(v.dialect)) +
                          " dialect but the environment is " + std::string(to_string(want)));
    std::set<std::string> names;
    for (const auto& v : variants)
        if (!names.insert(dir_name(v)).second) throw invalid("duplicate variant name " + v.display_name());
    if (parallelism < 1) throw invalid("parallelism must be positive");
    if (max_steps && *max_steps < 1) throw invalid("max_steps must be positive");
    if (adapt && d_max < 1) throw invalid("d_max must be at least 1");
    if (environment == EnvKind::Textcraft && !worlds.files.empty())
        throw invalid("world files apply to the household environment only");
    if (backend.kind == BackendConfig::Kind::Replay && backend.store.empty())
        throw invalid("replay backend needs a store path");
    if (backend.kind == BackendConfig::Kind::Http && backend.http.model.empty())
        throw invalid("http backend needs a model name");
    if (output_dir.empty()) throw invalid("output_dir is empty");
}

RunConfig parse_config(const nlohmann::json& j, const fs::path& base) {
    if (!j.is_object()) throw invalid("config must be a JSON object");
    static const std::set<std::string> kKeys{"environment", "worlds",    "variants",    "backend",     "max_steps",
                                             "adapt",       "output_dir", "parallelism", "truncation", "append",
                                             "data_dir",    "move_to_syntax"};
    for (const auto& [k, _] : j.items())
        if (!kKeys.count(k)) throw invalid("unknown config key '" + k + "'");
    for (const char* secret : {"api_key", "token", "authorization"})
        if (j.contains("backend") && j["backend"].contains(secret))
            throw invalid(std::string("backend.") + secret + " is not accepted; name an environment variable in api_key_env");

    RunConfig c;
    try {
        c.data_dir = j.contains("data_dir") ? resolve(j["data_dir"].get<std::string>(), base, ".")
                                            : assets::default_data_dir();
        c.environment = parse_env_kind(j.at("environment").get<std::string>());
        auto dialect = dialect_of(c.environment);

        if (j.contains("worlds")) {
            const auto& w = j["worlds"];
            if (w.is_string()) {
                if (w.get<std::string>() != "bundled") throw invalid("worlds must be \"bundled\" or an object");
            } else {
                c.worlds.bundled = false;
                for (const auto& s : w.value("seeds", nlohmann::json::array())) c.worlds.seeds.push_back(s.get<std::uint64_t>());
                for (const auto& f : w.value("files", nlohmann::json::array()))
                    c.worlds.files.push_back(resolve(f.get<std::string>(), base, c.data_dir));
                if (c.worlds.seeds.empty() && c.worlds.files.empty()) throw invalid("worlds lists neither seeds nor files");
            }
        }

        const auto& vs = j.at("variants");
        if (vs.is_string()) {
            if (vs.get<std::string>() != "ablation") throw invalid("variants must be \"ablation\" or a list");
            c.variants = ablation_variants(dialect);
        } else {
            for (const auto& v : vs) c.variants.push_back(parse_variant(v, dialect));
        }

        if (j.contains("backend")) {
            const auto& b = j["backend"];
            auto kind = strings::lower(b.value("kind", std::string("oracle")));
            if (kind == "oracle") c.backend.kind = BackendConfig::Kind::Oracle;
            else if (kind == "http") c.backend.kind = BackendConfig::Kind::Http;
            else if (kind == "replay") c.backend.kind = BackendConfig::Kind::Replay;
            else throw invalid("unknown backend kind '" + kind + "'");
            auto& h = c.backend.http;
            h.endpoint = b.value("endpoint", h.endpoint);
            h.model = b.value("model", h.model);
            h.api_key_env = b.value("api_key_env", h.api_key_env);
            h.timeout_seconds = b.value("timeout_seconds", h.timeout_seconds);
            h.retries = b.value("retries", h.retries);
            h.max_model_len = b.value("max_model_len", h.max_model_len);
            if (b.contains("store")) c.backend.store = resolve(b["store"].get<std::string>(), base, c.data_dir);
            if (b.contains("mode")) c.backend.mode = backend::parse_replay_mode(b["mode"].get<std::string>());
        }

        if (j.contains("max_steps") && !j["max_steps"].is_null()) c.max_steps = j["max_steps"].get<int>();
        if (j.contains("adapt")) {
            const auto& a = j["adapt"];
            c.adapt = a.value("enabled", true);
            c.d_max = a.value("d_max", 2);
        }
        if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>(), base, c.data_dir);
        else c.output_dir = base / "out";
        c.parallelism = j.value("parallelism", 1);
        if (j.contains("truncation")) {
            const auto& t = j["truncation"];
            c.max_prompt_chars = t.value("max_chars", std::size_t{0});
            if (t.contains("policy")) c.truncation = codec::parse_truncation_policy(t["policy"].get<std::string>());
        }
        c.append = j.value("append", false);
        c.move_to_syntax = j.value("move_to_syntax", false);
    } catch (const nlohmann::json::exception& e) {
        throw invalid(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    auto text = assets::read_text(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw invalid(path.string() + ": " + e.what());
    }
    return parse_config(j, fs::current_path());
}

RunSummary run(const RunConfig& config, std::ostream* log) {
    switch (config.backend.kind) {
        case BackendConfig::Kind::Oracle: return execute(config, nullptr, log);
        case BackendConfig::Kind::Http: {
            backend::HttpBackend http(config.backend.http);
            return execute(config, &http, log);
        }
        case BackendConfig::Kind::Replay: {
            if (!fs::exists(config.backend.store))
                throw Error(ErrorKind::Io, "replay store " + config.backend.store.string() + " not found");
            backend::ReplayStore store(config.backend.store, config.backend.mode);
            return execute(config, &store, log);
        }
    }
    throw invalid("unknown backend");
}

RunSummary record(const RunConfig& config, std::ostream* log) {
    if (config.backend.store.empty()) throw invalid("replay-record needs backend.store");
    backend::HttpBackend http(config.backend.http);
    backend::ReplayStore store(config.backend.store, config.backend.mode);
    backend::RecordingBackend rec(http, store);
    return execute(config, &rec, log);
}

ReportResult report(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::EmptyInput, dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    ReportResult out;
    std::map<std::pair<std::string, std::string>, Group> groups;
    std::vector<std::pair<std::string, std::string>> order;

    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        std::optional<nlohmann::json> header, result;
        std::vector<agent::StepRecord> steps;
        std::vector<nlohmann::json> nodes;
        while (std::getline(in, line)) {
            if (strings::trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
                auto type = j.at("type").get<std::string>();
                if (type == "header") header = j;
                else if (type == "step") steps.push_back(agent::step_from_json(j));
                else if (type == "node") nodes.push_back(j);
                else if (type == "result") result = j;
                else ++out.warnings;
            } catch (const std::exception&) {
                ++out.warnings;
            }
        }
        if (!header) {
            ++out.warnings;
            continue;
        }
        AgentVariant variant;
        eval::EpisodeSummary ep;
        std::string dialect;
        try {
            variant = agent::variant_from_json(header->at("variant"));
            dialect = header->at("dialect").get<std::string>();
            variant.dialect = parse_dialect(dialect);
            ep.env_id = header->value("env_id", f.stem().string());
            ep.max_steps = header->value("max_steps", agent::default_max_steps(variant.dialect));
            if (result) {
                ep.success = result->at("success").get<bool>();
                ep.steps_taken = result->at("steps_taken").get<int>();
                ep.max_steps = result->value("max_steps", ep.max_steps);
            } else {
                ep.steps_taken = static_cast<int>(steps.size());
                ep.success = !steps.empty() && steps.back().done;
            }
        } catch (const std::exception&) {
            ++out.warnings;
            continue;
        }
        ++out.files;
        std::pair key{variant.display_name(), dialect};
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) {
            order.push_back(key);
            it->second.variant = variant;
            it->second.environment = dialect;
        }
        auto& g = it->second;
        g.episodes.push_back(ep);
        g.records.insert(g.records.end(), steps.begin(), steps.end());
        if (header->value("adapt", false)) {
            if (!g.adapt) g.adapt.emplace();
            ++g.adapt->trees;
            bool decomposed = false;
            for (const auto& n : nodes) {
                ++g.adapt->nodes;
                g.adapt->max_depth = std::max(g.adapt->max_depth, n.value("depth", 0));
                if (n.value("outcome", std::string()) == "Decomposed") decomposed = true;
            }
            if (decomposed) ++g.adapt->decomposed;
        }
    }
    if (groups.empty()) throw Error(ErrorKind::EmptyInput, "no episodes under " + dir.string());

    out.json = nlohmann::ordered_json::object();
    auto arr = nlohmann::ordered_json::array();
    for (const auto& key : order) {
        auto& g = groups.at(key);
        auto r = eval::make_report(key.first, g.environment, g.episodes, g.records, g.variant);
        r.adapt = g.adapt;
        arr.push_back(eval::to_json(r));
        out.reports.push_back(std::move(r));
    }
    out.text = eval::render_text(out.reports);
    if (out.warnings > 0) out.text += "\nwarnings: " + std::to_string(out.warnings) + " corrupt or unreadable trace entries skipped\n";
    out.json["reports"] = arr;
    out.json["files"] = out.files;
    out.json["warnings"] = out.warnings;
    return out;
}

void write_report(const fs::path& dir, const ReportResult& result) {
    write_atomic(dir / "report.txt", result.text);
    write_atomic(dir / "report.json", result.json.dump(2) + "\n");
}

std::vector<fs::path> gen_worlds(EnvKind env, int count, std::uint64_t seed, const fs::path& out_dir,
                                 const fs::path& data_dir) {
    if (count < 1) throw invalid("count must be positive");
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    if (env == EnvKind::Household) {
        for (int i = 0; i < count; ++i) {
            auto s = seed + static_cast<std::uint64_t>(i);
            auto spec = household::generate_world(s, household::kind_for_seed(s));
            auto path = out_dir / (spec.id + ".json");
            household::save_world(path, spec);
            written.push_back(path);
        }
        return written;
    }
    auto book = assets::bundled_recipe_book(data_dir);
    std::vector<textcraft::CraftTask> tasks;
    for (int i = 0; i < count; ++i) {
        auto s = seed + static_cast<std::uint64_t>(i);
        tasks.push_back(textcraft::generate_task(book, 2 + static_cast<int>(s % 3), s));
    }
    auto path = out_dir / "tasks.json";
    textcraft::save_tasks(path, tasks);
    written.push_back(path);
    return written;
}

}  // namespace chainstate::harness

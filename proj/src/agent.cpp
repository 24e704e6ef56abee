#include "chainstate/agent.hpp"

#include <fstream>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::agent {

namespace {

std::string strip_period(std::string_view s) {
    auto t = strings::trim(s);
    while (!t.empty() && t.back() == '.') t.remove_suffix(1);
    return std::string(strings::trim(t));
}

bool same_goal(std::string_view a, std::string_view b) {
    return strings::normalize_ws(strip_period(a)) == strings::normalize_ws(strip_period(b));
}

}  // namespace

int default_max_steps(Dialect dialect) {
    switch (dialect) {
        case Dialect::Household: return 50;
        case Dialect::Webshop: return 15;
        case Dialect::Textcraft: return 40;
    }
    return 50;
}

std::string extract_goal(const Observation& initial, Dialect dialect) {
    auto lines = strings::split(initial.text, "\n");
    switch (dialect) {
        case Dialect::Household: {
            constexpr std::string_view kMarker = "Your task is to:";
            for (auto line : lines) {
                auto pos = line.find(kMarker);
                if (pos != std::string_view::npos) return strip_period(line.substr(pos + kMarker.size()));
            }
            break;
        }
        case Dialect::Webshop: {
            constexpr std::string_view kMarker = "Instruction:";
            for (std::size_t i = 0; i < lines.size(); ++i) {
                auto t = strings::trim(lines[i]);
                if (!strings::istarts_with(t, kMarker)) continue;
                auto rest = strings::trim(t.substr(kMarker.size()));
                if (!rest.empty()) return strip_period(rest);
                for (std::size_t j = i + 1; j < lines.size(); ++j)
                    if (!strings::trim(lines[j]).empty()) return strip_period(lines[j]);
            }
            break;
        }
        case Dialect::Textcraft: {
            constexpr std::string_view kMarker = "Goal:";
            for (auto line : lines) {
                auto t = strings::trim(line);
                if (strings::istarts_with(t, kMarker)) return strip_period(t.substr(kMarker.size()));
            }
            break;
        }
    }
    throw Error(ErrorKind::MissingTaskMarker, "no task line in the initial observation");
}

Decision decide_detailed(const Trace& trace, const AgentVariant& variant, backend::ModelBackend& backend,
                         const codec::FewShotSet& few_shot, const DecideOptions& options) {
    Decision d;
    d.prompt = codec::render_prompt(few_shot, trace, variant);
    if (options.max_prompt_chars > 0) d.prompt = codec::truncate_prompt(d.prompt, options.max_prompt_chars, options.truncation);
    auto request = backend::make_request(d.prompt, options.max_model_len);
    request.episode_id = options.episode_id;
    request.step = options.step;
    d.raw = backend.complete(request);
    try {
        d.parsed = codec::parse_completion(d.raw, variant);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ParseFailure) throw;
        d.parse_error = e.what();
    }
    return d;
}

AgentContext decide(const Trace& trace, const AgentVariant& variant, backend::ModelBackend& backend,
                    const codec::FewShotSet& few_shot, const DecideOptions& options) {
    auto d = decide_detailed(trace, variant, backend, few_shot, options);
    if (!d.parsed) throw Error(ErrorKind::ParseFailure, d.parse_error);
    return d.parsed->context;
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Solved: return "Solved";
        case Termination::StepLimit: return "StepLimit";
        case Termination::ParseFailure: return "ParseFailure";
        case Termination::BackendError: return "BackendError";
    }
    return "StepLimit";
}

Termination parse_termination(std::string_view text) {
    for (auto t : {Termination::Solved, Termination::StepLimit, Termination::ParseFailure, Termination::BackendError})
        if (strings::iequals(text, to_string(t))) return t;
    throw Error(ErrorKind::Validation, "unknown termination '" + std::string(text) + "'");
}

EpisodeResult run_episode(Environment& env, const AgentVariant& variant, backend::ModelBackend& backend,
                          const codec::FewShotSet& few_shot, int max_steps, const EpisodeOptions& options) {
    if (max_steps <= 0) throw Error(ErrorKind::Validation, "max_steps must be positive");
    EpisodeResult result;
    result.env_id = env.id();
    result.seed = env.seed();
    result.max_steps = max_steps;
    result.trace.initial = env.initial_observation();

    std::string goal;
    try {
        goal = extract_goal(result.trace.initial, env.dialect());
    } catch (const Error&) {
        // Without a marker the goal cannot be pinned; the model still sees o_0.
        goal.clear();
    }
    result.task = goal;

    if (env.task_solved()) {
        result.success = true;
        result.termination = Termination::Solved;
        return result;
    }

    DecideOptions dopt;
    dopt.episode_id = options.episode_id.empty() ? env.id() : options.episode_id;
    dopt.max_prompt_chars = options.max_prompt_chars;
    dopt.truncation = options.truncation;
    dopt.max_model_len = options.max_model_len;

    GoldState gold = env.ground_truth();
    result.termination = Termination::StepLimit;

    for (int step = 1; step <= max_steps; ++step) {
        StepRecord rec;
        rec.step = step;
        rec.node = options.node;
        rec.gold_state = gold;
        dopt.step = step - 1;

        Decision d;
        try {
            d = decide_detailed(result.trace, variant, backend, few_shot, dopt);
        } catch (const Error& e) {
            rec.error = e.what();
            result.records.push_back(std::move(rec));
            result.termination = Termination::BackendError;
            break;
        }
        rec.raw_completion = d.raw;
        if (!d.parsed) {
            rec.error = d.parse_error;
            result.records.push_back(std::move(rec));
            result.termination = Termination::ParseFailure;
            break;
        }
        rec.recoveries = d.parsed->recoveries;

        AgentContext ctx = d.parsed->context;
        if (variant.include_goal && !goal.empty()) {
            rec.goal_drift = !ctx.goal || !same_goal(*ctx.goal, goal);
            ctx.goal = goal;
        }
        rec.context = ctx;
        rec.normalized_action = env.normalize(ctx.action);

        auto outcome = env.step(ctx.action);
        rec.observation = outcome.observation;
        rec.accepted = outcome.observation.accepted;
        rec.done = outcome.done;
        gold = env.gold_update(gold, rec.normalized_action, outcome.observation);
        result.trace.steps.push_back({ctx, outcome.observation});
        result.records.push_back(rec);
        if (options.on_step) options.on_step(result.records.back(), env);

        if (outcome.success) {
            result.success = true;
            result.termination = Termination::Solved;
            break;
        }
    }
    result.steps_taken = static_cast<int>(result.records.size());
    return result;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

// nlohmann::json sorts keys; states are stored as [key, value] pairs to keep
// the canonical order.
nlohmann::ordered_json pairs_json(const StateFields& fields) {
    auto j = nlohmann::ordered_json::array();
    for (const auto& [k, v] : fields) j.push_back({k, v});
    return j;
}

StateFields pairs_from_json(const nlohmann::json& j) {
    StateFields out;
    if (j.is_array()) {
        for (const auto& p : j) out.set(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) out.set(k, v.get<std::string>());
    }
    return out;
}

}  // namespace

nlohmann::ordered_json header_json(const EpisodeResult& result, const AgentVariant& variant, Dialect dialect) {
    nlohmann::ordered_json j;
    j["type"] = "header";
    j["variant"] = {{"name", variant.display_name()},
                    {"label", variant.label()},
                    {"include_goal", variant.include_goal},
                    {"include_state", variant.include_state},
                    {"include_thought", variant.include_thought},
                    {"format", to_string(variant.format)},
                    {"track_visited", variant.track_visited}};
    j["dialect"] = to_string(dialect);
    j["seed"] = result.seed;
    j["env_id"] = result.env_id;
    j["max_steps"] = result.max_steps;
    j["task"] = result.task;
    return j;
}

AgentVariant variant_from_json(const nlohmann::json& j) {
    AgentVariant v;
    v.name = j.value("name", std::string());
    v.include_goal = j.value("include_goal", true);
    v.include_state = j.value("include_state", true);
    v.include_thought = j.value("include_thought", true);
    v.format = parse_format(j.value("format", std::string("text")));
    v.track_visited = j.value("track_visited", false);
    return v;
}

nlohmann::ordered_json step_json(const StepRecord& r) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["step"] = r.step;
    j["node"] = r.node;
    if (r.context) {
        j["goal"] = r.context->goal ? nlohmann::ordered_json(*r.context->goal) : nlohmann::ordered_json(nullptr);
        j["state"] = r.context->state ? pairs_json(*r.context->state) : nlohmann::ordered_json(nullptr);
        j["thought"] = r.context->thought ? nlohmann::ordered_json(*r.context->thought) : nlohmann::ordered_json(nullptr);
        j["action"] = r.context->action;
    } else {
        j["goal"] = nullptr;
        j["state"] = nullptr;
        j["thought"] = nullptr;
        j["action"] = nullptr;
    }
    j["observation"] = r.observation ? nlohmann::ordered_json(r.observation->text) : nlohmann::ordered_json(nullptr);
    j["accepted"] = r.accepted;
    j["done"] = r.done;
    j["gold_state"] = pairs_json(r.gold_state.fields);
    j["goal_drift"] = r.goal_drift;
    j["raw_completion"] = r.raw_completion;
    j["normalized_action"] = r.normalized_action;
    auto rec = nlohmann::ordered_json::array();
    for (auto x : r.recoveries) rec.push_back(codec::to_string(x));
    j["recoveries"] = rec;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

StepRecord step_from_json(const nlohmann::json& j) {
    StepRecord r;
    r.step = j.at("step").get<int>();
    r.node = j.value("node", 0);
    if (!j.at("action").is_null()) {
        AgentContext ctx;
        if (j.contains("goal") && !j["goal"].is_null()) ctx.goal = j["goal"].get<std::string>();
        if (j.contains("state") && !j["state"].is_null()) ctx.state = pairs_from_json(j["state"]);
        if (j.contains("thought") && !j["thought"].is_null()) ctx.thought = j["thought"].get<std::string>();
        ctx.action = j["action"].get<std::string>();
        r.context = std::move(ctx);
    }
    if (j.contains("observation") && !j["observation"].is_null())
        r.observation = Observation{r.step, j["observation"].get<std::string>(), j.value("accepted", false)};
    r.accepted = j.value("accepted", false);
    r.done = j.value("done", false);
    if (j.contains("gold_state")) r.gold_state.fields = pairs_from_json(j["gold_state"]);
    r.goal_drift = j.value("goal_drift", false);
    r.raw_completion = j.value("raw_completion", std::string());
    r.normalized_action = j.value("normalized_action", std::string());
    r.error = j.value("error", std::string());
    return r;
}

nlohmann::ordered_json result_json(const EpisodeResult& result) {
    return nlohmann::ordered_json{{"type", "result"},
            {"success", result.success},
            {"steps_taken", result.steps_taken},
            {"max_steps", result.max_steps},
            {"termination", to_string(result.termination)}};
}

void write_episode(std::ostream& out, const EpisodeResult& result, const AgentVariant& variant) {
    out << header_json(result, variant, variant.dialect).dump() << "\n";
    for (const auto& r : result.records) out << step_json(r).dump() << "\n";
    out << result_json(result).dump() << "\n";
}

void write_episode(const std::filesystem::path& path, const EpisodeResult& result, const AgentVariant& variant) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    write_episode(out, result, variant);
}

}  // namespace chainstate::agent

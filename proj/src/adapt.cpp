#include "chainstate/adapt.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::adapt {

namespace {

constexpr std::size_t kPlannerHistory = 10;

std::string node_episode(const std::string& prefix, int id) {
    return id == 0 ? prefix : prefix + "/n" + std::to_string(id);
}

}  // namespace

std::string_view to_string(NodeOutcome outcome) {
    switch (outcome) {
        case NodeOutcome::Solved: return "Solved";
        case NodeOutcome::Failed: return "Failed";
        case NodeOutcome::Decomposed: return "Decomposed";
    }
    return "Failed";
}

PlannerPrompt load_planner_prompt(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    return {text};
}

std::vector<std::string> parse_plan(std::string_view completion) {
    static const std::regex kLine{R"(^\s*(?:[Ss]tep\s+)?(\d+)[.):]\s*(.+)$)"};
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto raw : strings::split(completion, "\n")) {
        std::string line(raw);
        std::smatch m;
        if (!std::regex_match(line, m, kLine)) continue;
        std::string item(strings::trim(m[2].str()));
        while (!item.empty() && item.back() == '.') item.pop_back();
        if (item.empty()) continue;
        if (!seen.insert(strings::normalize_ws(item)).second) continue;
        out.push_back(item);
        if (out.size() == kMaxSubtasks) break;
    }
    if (out.empty()) throw Error(ErrorKind::ParseFailure, "planner completion has no numbered lines");
    return out;
}

std::string render_planner_prompt(const PlannerPrompt& planner, std::string_view task, const Trace& trace,
                                  const AgentVariant& variant) {
    Trace recent;
    recent.initial = trace.initial;
    auto from = trace.steps.size() > kPlannerHistory ? trace.steps.size() - kPlannerHistory : 0;
    recent.steps.assign(trace.steps.begin() + static_cast<std::ptrdiff_t>(from), trace.steps.end());
    std::string out = planner.text;
    out += "\n\n\nHere is the task.\n";
    out += codec::serialize_trace(recent, variant);
    out += "\n\nTask: ";
    out += task;
    out += "\nPlan:\n";
    return out;
}

std::vector<std::string> plan_decompose(std::string_view task, const Trace& trace, backend::ModelBackend& backend,
                                        const PlannerPrompt& planner, const AgentVariant& variant,
                                        const PlanCall& call, std::string* raw) {
    auto request = backend::make_request(render_planner_prompt(planner, task, trace, variant), call.max_model_len);
    request.episode_id = call.episode_id;
    request.step = call.step;
    request.purpose = backend::Purpose::Plan;
    auto text = backend.complete(request);
    if (raw) *raw = text;
    return parse_plan(text);
}

AdaptResult run_adapt(std::string_view task, Environment& env, const AgentVariant& variant,
                      backend::ModelBackend& backend, backend::ModelBackend& planner_backend,
                      const codec::FewShotSet& few_shot, const PlannerPrompt& planner, const AdaptOptions& options) {
    if (options.d_max < 1) throw Error(ErrorKind::Validation, "d_max must be at least 1");
    AdaptResult result;
    int next_id = 0;
    std::string prefix = options.episode.episode_id.empty() ? env.id() : options.episode.episode_id;

    std::function<DecompositionNode(const std::string&, int, int)> run_node =
        [&](const std::string& text, int depth, int parent) {
            DecompositionNode node;
            node.id = next_id++;
            node.parent = parent;
            node.task = text;
            node.depth = depth;
            ++result.node_count;
            result.max_depth = std::max(result.max_depth, depth);

            bool retarget = depth > 0;
            if (depth == 0) {
                try {
                    auto current = agent::extract_goal(env.initial_observation(), env.dialect());
                    retarget = strings::normalize_ws(current) != strings::normalize_ws(text);
                } catch (const Error&) {
                    retarget = true;
                }
            }
            if (retarget && !env.begin_subtask(text)) {
                node.note = "subtask is outside what the environment can check";
                return node;
            }
            if (env.task_solved()) {
                node.outcome = NodeOutcome::Solved;
                node.success = true;
                return node;
            }

            auto opts = options.episode;
            opts.episode_id = node_episode(prefix, node.id);
            opts.node = node.id;
            node.attempt = agent::run_episode(env, variant, backend, few_shot, options.max_steps, opts);
            ++result.executed_leaves;
            result.total_steps += node.attempt->steps_taken;
            if (node.attempt->success) {
                node.outcome = NodeOutcome::Solved;
                node.success = true;
                return node;
            }
            if (depth >= options.d_max) return node;

            std::vector<std::string> plan;
            try {
                plan = plan_decompose(text, node.attempt->trace, planner_backend, planner, variant,
                                      {opts.episode_id + "/plan", 0, options.episode.max_model_len},
                                      &node.planner_completion);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::ParseFailure) throw;
                node.note = e.what();
                return node;
            }
            node.outcome = NodeOutcome::Decomposed;
            node.success = true;
            for (const auto& sub : plan) {
                node.children.push_back(run_node(sub, depth + 1, node.id));
                if (!node.children.back().success) {
                    node.success = false;
                    break;
                }
            }
            return node;
        };

    result.root = run_node(std::string(task), 0, -1);
    result.success = result.root.success;
    return result;
}

std::vector<const DecompositionNode*> flatten(const DecompositionNode& root) {
    std::vector<const DecompositionNode*> out;
    std::function<void(const DecompositionNode&)> walk = [&](const DecompositionNode& n) {
        out.push_back(&n);
        for (const auto& c : n.children) walk(c);
    };
    walk(root);
    return out;
}

void write_tree(std::ostream& out, const AdaptResult& result, const AgentVariant& variant, const std::string& env_id,
                std::uint64_t seed, int max_steps) {
    agent::EpisodeResult summary;
    summary.env_id = env_id;
    summary.seed = seed;
    summary.task = result.root.task;
    summary.success = result.success;
    summary.steps_taken = result.total_steps;
    summary.max_steps = max_steps;
    summary.termination = result.success ? agent::Termination::Solved
                          : result.root.attempt ? result.root.attempt->termination
                                                : agent::Termination::StepLimit;

    auto header = agent::header_json(summary, variant, variant.dialect);
    header["adapt"] = true;
    out << header.dump() << "\n";
    auto nodes = flatten(result.root);
    for (const auto* n : nodes)
        if (n->attempt)
            for (const auto& r : n->attempt->records) out << agent::step_json(r).dump() << "\n";
    for (const auto* n : nodes) {
        nlohmann::ordered_json j{{"type", "node"},
                                 {"id", n->id},
                                 {"parent", n->parent},
                                 {"task", n->task},
                                 {"depth", n->depth},
                                 {"outcome", to_string(n->outcome)},
                                 {"success", n->success},
                                 {"steps", n->attempt ? n->attempt->steps_taken : 0}};
        if (!n->planner_completion.empty()) j["planner_completion"] = n->planner_completion;
        if (!n->note.empty()) j["note"] = n->note;
        out << j.dump() << "\n";
    }
    out << agent::result_json(summary).dump() << "\n";
}

}  // namespace chainstate::adapt

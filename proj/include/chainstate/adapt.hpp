#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/agent.hpp"

namespace chainstate::adapt {

inline constexpr std::size_t kMaxSubtasks = 8;

enum class NodeOutcome { Solved, Failed, Decomposed };

std::string_view to_string(NodeOutcome outcome);

struct DecompositionNode {
    int id = 0;
    int parent = -1;
    std::string task;
    int depth = 0;
    NodeOutcome outcome = NodeOutcome::Failed;
    bool success = false;
    std::vector<DecompositionNode> children;
    std::optional<agent::EpisodeResult> attempt;   // base-agent run at this node, if any
    std::string planner_completion;
    std::string note;   // why the node failed without a run or a plan
};

/// Few-shot planner prompt: an instruction paragraph plus worked examples,
/// followed by the current task.
struct PlannerPrompt {
    std::string text;
};

PlannerPrompt load_planner_prompt(const std::filesystem::path& path);

/// Numbered lines ("1. x", "2) y", "Step 3: z") in order, deduplicated and
/// capped at kMaxSubtasks. Throws Error(ParseFailure) when none are found.
std::vector<std::string> parse_plan(std::string_view completion);

std::string render_planner_prompt(const PlannerPrompt& planner, std::string_view task, const Trace& trace,
                                  const AgentVariant& variant);

struct PlanCall {
    std::string episode_id;
    int step = 0;
    int max_model_len = 0;
};

/// One planner call; backend errors propagate.
std::vector<std::string> plan_decompose(std::string_view task, const Trace& trace, backend::ModelBackend& backend,
                                        const PlannerPrompt& planner, const AgentVariant& variant,
                                        const PlanCall& call = {}, std::string* raw = nullptr);

struct AdaptOptions {
    int d_max = 2;
    int max_steps = 50;
    agent::EpisodeOptions episode;   // episode_id is used as the prefix of per-node replay keys
};

struct AdaptResult {
    bool success = false;
    DecompositionNode root;
    int total_steps = 0;
    int executed_leaves = 0;
    int node_count = 0;
    int max_depth = 0;
};

/// Runs the base agent on `task`; on failure below d_max, asks the planner
/// for subtasks and runs them in order on the same live environment. A
/// node succeeds when its own run does, or when every child does.
/// `planner_backend` answers plan requests and may be the same object as
/// `backend`.
AdaptResult run_adapt(std::string_view task, Environment& env, const AgentVariant& variant,
                      backend::ModelBackend& backend, backend::ModelBackend& planner_backend,
                      const codec::FewShotSet& few_shot, const PlannerPrompt& planner, const AdaptOptions& options);

/// Flattened nodes, parents before children.
std::vector<const DecompositionNode*> flatten(const DecompositionNode& root);

/// Header, every node's step records tagged with its id, node lines and a
/// result line.
void write_tree(std::ostream& out, const AdaptResult& result, const AgentVariant& variant, const std::string& env_id,
                std::uint64_t seed, int max_steps);

}  // namespace chainstate::adapt

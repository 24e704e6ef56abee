#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/backend.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/environment.hpp"
#include "chainstate/types.hpp"

namespace chainstate::agent {

/// Default step budgets per dialect: 50 household, 15 webshop, 40 textcraft.
int default_max_steps(Dialect dialect);

/// Task sentence of o_0 without its marker and trailing period. Throws
/// Error(MissingTaskMarker).
std::string extract_goal(const Observation& initial, Dialect dialect);

struct DecideOptions {
    std::string episode_id;
    int step = 0;
    std::size_t max_prompt_chars = 0;   // 0 disables truncation
    codec::TruncationPolicy truncation = codec::TruncationPolicy::DropOldestSteps;
    int max_model_len = 0;
};

struct Decision {
    std::string prompt;
    std::string raw;
    std::optional<codec::ParseResult> parsed;   // empty when the completion had no action
    std::string parse_error;
};

/// One backend call and a best-effort parse; backend errors propagate.
Decision decide_detailed(const Trace& trace, const AgentVariant& variant, backend::ModelBackend& backend,
                         const codec::FewShotSet& few_shot, const DecideOptions& options = {});

/// Throws Error(ParseFailure) when the completion cannot be parsed.
AgentContext decide(const Trace& trace, const AgentVariant& variant, backend::ModelBackend& backend,
                    const codec::FewShotSet& few_shot, const DecideOptions& options = {});

enum class Termination { Solved, StepLimit, ParseFailure, BackendError };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view text);

struct StepRecord {
    int step = 0;   // 1-based within the episode
    int node = 0;   // decomposition node the step belongs to
    std::string raw_completion;
    std::optional<AgentContext> context;
    std::string normalized_action;
    std::optional<Observation> observation;
    bool accepted = false;
    bool done = false;
    GoldState gold_state;   // state the model should have reported, i.e. before the action ran
    bool goal_drift = false;
    std::vector<codec::Recovery> recoveries;
    std::string error;
};

struct EpisodeResult {
    std::string env_id;
    std::uint64_t seed = 0;
    std::string task;
    bool success = false;
    int steps_taken = 0;
    int max_steps = 0;
    Termination termination = Termination::StepLimit;
    std::vector<StepRecord> records;
    Trace trace;
};

struct EpisodeOptions {
    std::string episode_id;   // replay key; defaults to the environment id
    int node = 0;
    std::size_t max_prompt_chars = 0;
    codec::TruncationPolicy truncation = codec::TruncationPolicy::DropOldestSteps;
    int max_model_len = 0;
    // Called after every step with the environment in its post-step state.
    std::function<void(const StepRecord&, const Environment&)> on_step;
};

/// decide, act, repeat until solved, out of budget or an unrecoverable
/// model error. Never throws for model-side failures.
EpisodeResult run_episode(Environment& env, const AgentVariant& variant, backend::ModelBackend& backend,
                          const codec::FewShotSet& few_shot, int max_steps, const EpisodeOptions& options = {});

// ---------------------------------------------------------------------------
// JSONL persistence

nlohmann::ordered_json header_json(const EpisodeResult& result, const AgentVariant& variant, Dialect dialect);
nlohmann::ordered_json step_json(const StepRecord& record);
nlohmann::ordered_json result_json(const EpisodeResult& result);

StepRecord step_from_json(const nlohmann::json& j);
AgentVariant variant_from_json(const nlohmann::json& j);

void write_episode(std::ostream& out, const EpisodeResult& result, const AgentVariant& variant);
void write_episode(const std::filesystem::path& path, const EpisodeResult& result, const AgentVariant& variant);

}  // namespace chainstate::agent

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/agent.hpp"

namespace chainstate::eval {

struct StateAccuracy {
    double overall = 0.0;                  // every predicted key right
    std::map<std::string, double> per_key;
    int steps = 0;
};

/// Compares each parsed state against the gold snapshot on the keys the
/// variant predicts; values are compared trimmed, lowercased and
/// whitespace-collapsed. Steps without a parsed context count as wrong.
/// Throws Error(NoStateVariant) or Error(EmptyInput).
StateAccuracy state_accuracy(const std::vector<agent::StepRecord>& records, const AgentVariant& variant);

/// Minimal per-episode view the metrics need; also what report() rebuilds
/// from trace files.
struct EpisodeSummary {
    std::string env_id;
    bool success = false;
    int steps_taken = 0;
    int max_steps = 0;
};

EpisodeSummary summarize(const agent::EpisodeResult& result);

enum class StepScope { All, SolvedOnly };

/// Mean steps. Under All a failed episode counts at its budget. Throws
/// Error(EmptyInput) when nothing falls in scope.
double avg_steps(const std::vector<EpisodeSummary>& episodes, StepScope scope);

struct Bucket {
    int low = 1;
    int high = 10;
    int attempted = 0;
    int solved = 0;

    std::string label() const { return std::to_string(low) + "-" + std::to_string(high); }
};

/// Buckets 1-10, 11-20, ... up to the largest budget; failed episodes land in
/// the bucket holding their budget. Throws Error(EmptyInput).
std::vector<Bucket> bucket_success(const std::vector<EpisodeSummary>& episodes, int bucket_width = 10);

struct AdaptStats {
    int trees = 0;
    int decomposed = 0;
    int max_depth = 0;
    int nodes = 0;
};

struct MetricsReport {
    std::string variant;
    std::string environment;
    int episodes = 0;
    double success_rate = 0.0;
    double avg_steps_all = 0.0;
    std::optional<double> avg_steps_solved;
    std::optional<StateAccuracy> state_accuracy;
    std::vector<Bucket> buckets;
    int goal_drift_steps = 0;
    int parse_failures = 0;
    std::optional<AdaptStats> adapt;
};

/// Builds one report; `records` may be empty for variants without state.
MetricsReport make_report(const std::string& variant_name, const std::string& environment,
                          const std::vector<EpisodeSummary>& episodes,
                          const std::vector<agent::StepRecord>& records, const AgentVariant& variant);

nlohmann::ordered_json to_json(const MetricsReport& report);

/// Aligned per-variant detail followed by a variant x environment success
/// table.
std::string render_text(const std::vector<MetricsReport>& reports);

}  // namespace chainstate::eval

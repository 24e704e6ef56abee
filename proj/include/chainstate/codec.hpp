#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainstate/types.hpp"

namespace chainstate::codec {

/// Surface grammar of one dialect: key spelling, block marker, observation prefix.
struct PromptLayout {
    Dialect dialect;
    std::string goal_key;
    std::vector<std::string> state_keys;   // canonical order, without optional keys
    std::string visited_key;               // empty when the dialect has none
    std::string thought_key;
    std::string action_key;
    std::string marker;                    // ">" or empty
    std::string observation_prefix;        // "Observation:" or empty
    std::string preamble;                  // empty when the dialect has none
};

const PromptLayout& layout(Dialect dialect);

inline constexpr std::string_view kTaskMarker = "Here is the task.";
inline constexpr std::string_view kTaskPlaceholder = "<CURRENT TASK>";

/// Recovery rules the completion parser may apply. Bundled assets must parse
/// without triggering any of them.
enum class Recovery {
    LeadingBlankSkipped,
    StoppedAtBlankLine,
    StoppedAtObservation,
    StoppedAtNewBlock,
    ExtraActionIgnored,
    UnknownKeyIgnored,
    DuplicateKeyIgnored,
    StrayLineDiscarded,
    LenientJson,
};

std::string_view to_string(Recovery recovery);

struct ParseResult {
    AgentContext context;
    std::vector<Recovery> recoveries;
    std::vector<std::string> missing;   // enabled fields the completion did not supply
};

std::string serialize_context(const AgentContext& ctx, const AgentVariant& variant);

/// Parses one model completion. Throws Error(ParseFailure) when no action
/// line can be recovered.
ParseResult parse_completion(std::string_view text, const AgentVariant& variant);

std::string serialize_observation(const Observation& obs, Dialect dialect);
Observation parse_observation(std::string_view chunk, Dialect dialect, int step_index);

/// o_0 followed by the serialized history, blocks separated by blank lines.
std::string serialize_trace(const Trace& trace, const AgentVariant& variant);

struct FewShotSet {
    Dialect dialect = Dialect::Household;
    std::optional<std::string> task_type;
    std::vector<Trace> examples;
};

/// A bundled prompt asset, kept with enough layout detail to reproduce the
/// file byte for byte.
struct PromptDocument {
    Dialect dialect = Dialect::Household;
    bool has_preamble = false;
    bool has_header = false;
    bool has_trailer = false;
    bool final_newline = false;
    std::vector<Trace> examples;
    std::size_t recoveries = 0;
};

PromptDocument parse_prompt_document(std::string_view text, Dialect dialect);
std::string serialize_prompt_document(const PromptDocument& doc, const AgentVariant& variant);

FewShotSet load_few_shot(const std::filesystem::path& path, Dialect dialect,
                         std::optional<std::string> task_type = std::nullopt);

std::string render_prompt(const FewShotSet& few_shot, const Trace& trace, const AgentVariant& variant);

enum class TruncationPolicy { TailSlice, DropOldestSteps };

TruncationPolicy parse_truncation_policy(std::string_view text);

std::string truncate_prompt(std::string_view prompt, std::size_t max_chars,
                            TruncationPolicy policy = TruncationPolicy::DropOldestSteps);

/// Whitespace-separated token count; the unit the example-size bounds use.
std::size_t word_count(std::string_view text);

/// One few-shot example exactly as it appears inside a rendered prompt.
std::string render_example(const Trace& example, const AgentVariant& variant);

}  // namespace chainstate::codec

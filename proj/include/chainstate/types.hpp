#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chainstate {

enum class Dialect { Household, Webshop, Textcraft };
enum class Format { PlainText, Json };

std::string_view to_string(Dialect dialect);
std::string_view to_string(Format format);
Dialect parse_dialect(std::string_view text);
Format parse_format(std::string_view text);

/// Ordered (key, value) pairs predicted by the agent. Keys use the dialect's
/// canonical spelling and appear in the dialect's canonical order.
class StateFields {
public:
    using Entry = std::pair<std::string, std::string>;

    StateFields() = default;
    StateFields(std::initializer_list<Entry> entries) : entries_(entries) {}

    void set(std::string key, std::string value);
    const std::string* find(std::string_view key) const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    const std::vector<Entry>& entries() const { return entries_; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    friend bool operator==(const StateFields&, const StateFields&) = default;

private:
    std::vector<Entry> entries_;
};

/// One step's output of the contextual policy: goal, state, thought, action.
/// Fields switched off by the active variant stay disengaged.
struct AgentContext {
    std::optional<std::string> goal;
    std::optional<StateFields> state;
    std::optional<std::string> thought;
    std::string action;

    friend bool operator==(const AgentContext&, const AgentContext&) = default;
};

struct Observation {
    int step_index = 0;
    std::string text;
    bool accepted = true;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct TraceStep {
    AgentContext context;
    // Only the final step of a few-shot example may lack an observation.
    std::optional<Observation> observation;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
    Observation initial;
    std::vector<TraceStep> steps;

    friend bool operator==(const Trace&, const Trace&) = default;
};

struct AgentVariant {
    std::string name;
    bool include_goal = true;
    bool include_state = true;
    bool include_thought = true;
    Dialect dialect = Dialect::Household;
    Format format = Format::PlainText;
    // Adds a "locations visited" state key; household only.
    bool track_visited = false;

    /// Row label in the ablation layout, e.g. "Goal+State+Thought+Act".
    std::string label() const;
    std::string display_name() const { return name.empty() ? label() : name; }

    friend bool operator==(const AgentVariant&, const AgentVariant&) = default;
};

/// The eight goal/state/thought combinations, in ablation-table row order.
std::vector<AgentVariant> ablation_variants(Dialect dialect, Format format = Format::PlainText);

AgentVariant full_variant(Dialect dialect, Format format = Format::PlainText);

/// State keys the variant predicts, in canonical order.
std::vector<std::string> state_keys(const AgentVariant& variant);

}  // namespace chainstate

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainstate/types.hpp"

namespace chainstate {

/// Heuristically tracked ground truth, keyed with the dialect's canonical
/// state keys ("current location", "current inventory", ...).
struct GoldState {
    StateFields fields;

    std::string get(std::string_view key) const {
        const auto* v = fields.find(key);
        return v ? *v : std::string("None");
    }

    /// Restricted to the keys a variant actually predicts.
    GoldState project(const std::vector<std::string>& keys) const;

    friend bool operator==(const GoldState&, const GoldState&) = default;
};

struct StepOutcome {
    Observation observation;
    bool done = false;
    bool success = false;
};

/// A text environment the agent acts in. One instance serves one episode and
/// is not shared between threads.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Dialect dialect() const = 0;
    virtual std::string id() const = 0;
    virtual std::uint64_t seed() const = 0;
    virtual int default_max_steps() const = 0;

    /// o_0 of the active task (the original task, or the subtask most
    /// recently started with begin_subtask).
    virtual const Observation& initial_observation() const = 0;

    /// Throws Error(EpisodeFinished) once the active task has been solved.
    virtual StepOutcome step(std::string_view action_text) = 0;

    /// Canonical spelling of an action, or the trimmed input when it is
    /// outside the grammar.
    virtual std::string normalize(std::string_view action_text) const = 0;

    /// Agent-visible truth: location/inventory as the state fields spell them.
    /// Episodes seed their gold tracker from this value.
    virtual GoldState ground_truth() const = 0;

    /// Tracks gold state from the submitted action and the resulting
    /// observation only.
    virtual GoldState gold_update(const GoldState& prev, std::string_view action,
                                  const Observation& obs) const = 0;

    /// Next action of the scripted solver for the active task. May read
    /// hidden world state.
    virtual std::string oracle_action() const = 0;

    /// Subtask list the scripted solver would follow for the active task.
    virtual std::vector<std::string> oracle_plan() const = 0;

    /// Re-targets the live world at a subtask; returns the subtask's o_0, or
    /// nullopt when the subtask text is outside what this world can check.
    virtual std::optional<Observation> begin_subtask(std::string_view task) = 0;

    virtual bool task_solved() const = 0;
};

}  // namespace chainstate

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chainstate/environment.hpp"

namespace chainstate::household {

enum class ApplianceKind { None, SinkBasin, Microwave, StoveBurner, Fridge, DeskLamp };
enum class TaskKind { Clean, Heat, Cool, Examine, Put, PutTwo };

inline constexpr std::array<TaskKind, 6> kTaskKinds{TaskKind::Clean,   TaskKind::Heat, TaskKind::Cool,
                                                     TaskKind::Examine, TaskKind::Put,  TaskKind::PutTwo};

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);
std::string_view to_string(ApplianceKind kind);
ApplianceKind parse_appliance_kind(std::string_view text);

/// Task kind assigned to a generated seed: seeds 1..6 cycle through the six
/// kinds in declaration order.
TaskKind kind_for_seed(std::uint64_t seed);

struct ReceptacleSpec {
    std::string name;   // "<type> <index>", e.g. "fridge 1"
    bool openable = false;
    ApplianceKind appliance = ApplianceKind::None;
};

struct ObjectSpec {
    std::string name;
    std::string receptacle;
    bool clean = false;
    bool hot = false;
    bool cool = false;
};

struct TaskSpec {
    TaskKind kind = TaskKind::Put;
    std::string object_type;
    std::string target;        // receptacle type; "desklamp" for Examine
    std::string description;   // overrides the generated task sentence when set
};

struct WorldSpec {
    std::string id;
    std::uint64_t seed = 0;
    std::vector<ReceptacleSpec> receptacles;
    std::vector<ObjectSpec> objects;
    TaskSpec task;

    /// Throws Error(Validation) on dangling placements or malformed names.
    void validate() const;
};

/// "put a hot apple in fridge." style sentence (with trailing period).
std::string task_sentence(const TaskSpec& task);

/// Type part of an entity name: "cabinet 13" -> "cabinet".
std::string entity_type(std::string_view name);

struct GenerationOptions {
    int min_receptacles = 6;
    int max_receptacles = 14;
    int min_distractors = 3;
    int max_distractors = 8;
};

WorldSpec generate_world(std::uint64_t seed, TaskKind kind, const GenerationOptions& options = {});

nlohmann::json to_json(const WorldSpec& spec);
WorldSpec world_from_json(const nlohmann::json& j);
std::string dump_world(const WorldSpec& spec);
WorldSpec parse_world(std::string_view text);
WorldSpec load_world(const std::filesystem::path& path);
void save_world(const std::filesystem::path& path, const WorldSpec& spec);

enum class Verb { GoTo, Open, Close, Put, Take, Cool, Heat, Clean, Use };

struct HouseholdAction {
    Verb verb = Verb::GoTo;
    std::vector<std::string> operands;   // 1 for GoTo/Open/Close/Use, 2 otherwise

    /// Spelling the environment accepts; Put renders as "put X in/on Y", or
    /// "move X to Y" under the move-to syntax.
    std::string canonical(bool move_to_syntax = false) const;

    friend bool operator==(const HouseholdAction&, const HouseholdAction&) = default;
};

struct ActionSyntax {
    bool move_to_syntax = false;
};

std::optional<HouseholdAction> try_normalize_action(std::string_view text, ActionSyntax syntax = {});

/// Throws Error(UnrecognizedAction) for text outside the grammar.
HouseholdAction normalize_action(std::string_view text, ActionSyntax syntax = {});

inline constexpr std::string_view kRejected = "Nothing happens.";

struct EnvOptions {
    bool move_to_syntax = false;
    int max_steps = 50;
};

/// Mutable world state; copyable so the scripted solver can look ahead.
class World {
public:
    struct Object {
        std::string name;
        std::string type;
        std::string place;   // receptacle name; empty while held
        bool clean = false;
        bool hot = false;
        bool cool = false;
    };

    struct Receptacle {
        ReceptacleSpec spec;
        bool open = false;
    };

    struct Applied {
        std::string text;
        bool accepted = false;
        std::optional<HouseholdAction> action;
    };

    World() = default;
    World(const WorldSpec& spec, ActionSyntax syntax);

    Applied apply(std::string_view action_text);

    const std::vector<Object>& objects() const { return objects_; }
    const std::vector<Receptacle>& receptacles() const { return receptacles_; }
    const Object* object(std::string_view name) const;
    const Receptacle* receptacle(std::string_view name) const;
    const std::optional<std::string>& location() const { return location_; }
    const Object* held() const;
    const std::vector<std::string>& visited() const { return visited_; }
    const std::set<std::string>& examined_types() const { return examined_types_; }
    int lamp_uses() const { return lamp_uses_; }

    bool accessible(const Receptacle& r) const { return !r.spec.openable || r.open; }
    std::vector<const Object*> contents(std::string_view receptacle) const;
    std::string room_listing() const;
    std::string describe_arrival(const Receptacle& r) const;

    /// Number of objects of `type` resting in any receptacle of `target_type`,
    /// optionally requiring a property.
    int count_in(std::string_view type, std::string_view target_type, bool (*property)(const Object&) = nullptr) const;

private:
    Object* mutable_object(std::string_view name);
    Receptacle* mutable_receptacle(std::string_view name);

    ActionSyntax syntax_;
    std::vector<Object> objects_;
    std::vector<Receptacle> receptacles_;
    std::optional<std::string> location_;
    std::optional<std::string> inventory_;
    std::vector<std::string> visited_;
    std::set<std::string> examined_types_;
    int lamp_uses_ = 0;
};

/// Deterministic household environment (Alfworld-like).
class HouseholdEnv : public Environment {
public:
    explicit HouseholdEnv(WorldSpec spec, EnvOptions options = {});

    Dialect dialect() const override { return Dialect::Household; }
    std::string id() const override { return spec_.id; }
    std::uint64_t seed() const override { return spec_.seed; }
    int default_max_steps() const override { return options_.max_steps; }
    const Observation& initial_observation() const override { return initial_; }
    StepOutcome step(std::string_view action_text) override;
    std::string normalize(std::string_view action_text) const override;
    GoldState ground_truth() const override;
    GoldState gold_update(const GoldState& prev, std::string_view action, const Observation& obs) const override;
    std::string oracle_action() const override;
    std::vector<std::string> oracle_plan() const override;
    std::optional<Observation> begin_subtask(std::string_view task) override;
    bool task_solved() const override;

    const WorldSpec& spec() const { return spec_; }
    const World& world() const { return world_; }
    bool done() const { return done_; }

    /// Full scripted rollout from the current state (does not mutate).
    std::vector<std::string> oracle_rollout(int limit = 100) const;

    // Active goal; the original task or a subtask started by begin_subtask.
    struct Goal {
        enum class Kind { Main, Primitive, Hold, Apply, PutInto, Examine };
        Kind kind = Kind::Main;
        std::string text;
        std::string object_type;
        std::string target_type;
        Verb verb = Verb::Heat;
        std::string primitive;   // canonical action for Kind::Primitive
        int baseline = 0;        // count_in / lamp uses at subtask start
    };

private:
    bool satisfied(const World& w, const Goal& g, bool primitive_done) const;
    std::optional<std::string> next_action(const World& w, const Goal& g) const;

    WorldSpec spec_;
    EnvOptions options_;
    World world_;
    Observation initial_;
    Goal goal_;
    bool primitive_done_ = false;
    bool done_ = false;
    int steps_ = 0;
};

}  // namespace chainstate::household

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "chainstate/environment.hpp"

namespace chainstate::textcraft {

struct ItemCount {
    std::string item;
    int count = 1;

    friend bool operator==(const ItemCount&, const ItemCount&) = default;
};

struct Recipe {
    ItemCount output;
    std::vector<ItemCount> inputs;

    /// "craft 1 stick using 1 plank"
    std::string text() const;

    friend bool operator==(const Recipe&, const Recipe&) = default;
};

class RecipeBook {
public:
    RecipeBook() = default;
    RecipeBook(std::vector<Recipe> recipes, std::set<std::string> base_items);

    const std::vector<Recipe>& recipes() const { return recipes_; }
    const std::set<std::string>& base_items() const { return base_; }
    bool is_base(std::string_view item) const { return base_.count(std::string(item)) > 0; }
    std::vector<const Recipe*> recipes_for(std::string_view item) const;
    bool knows(std::string_view item) const;

    /// Every base item and recipe output, sorted.
    std::vector<std::string> items() const;

    /// Throws Error(Validation) when the graph has a cycle, a self-input, a
    /// non-positive count or an input nobody can produce.
    void validate() const;

private:
    std::vector<Recipe> recipes_;
    std::set<std::string> base_;
};

/// Line-oriented recipe file: "base <item>" and "craft ..." records; blank
/// lines and '#' comments are skipped.
RecipeBook parse_recipe_book(std::string_view text);
RecipeBook load_recipe_book(const std::filesystem::path& path);
std::string dump_recipe_book(const RecipeBook& book);

/// 0 for base items; otherwise 1 + the deepest input, minimized over the
/// item's recipes. Throws Error(UnknownItem).
int recipe_depth(const RecipeBook& book, std::string_view item);

/// Depth of every reachable item at once.
std::map<std::string, int> recipe_depths(const RecipeBook& book);

struct Command {
    enum class Kind { Inventory, Get, Craft };
    Kind kind = Kind::Inventory;
    ItemCount target;
    std::vector<ItemCount> inputs;   // Craft only
};

/// Shared by the recipe file and the environment's command line.
std::optional<Command> parse_command(std::string_view text);

struct CraftTask {
    std::string id;
    std::uint64_t seed = 0;
    ItemCount target;
    int depth = 0;

    friend bool operator==(const CraftTask&, const CraftTask&) = default;
};

/// Deterministic pick of an item at `depth`. Throws Error(NoItemAtDepth).
CraftTask generate_task(const RecipeBook& book, int depth, std::uint64_t seed);

/// Ten tasks each at depths 2, 3 and 4 (seeds 0..9).
std::vector<CraftTask> bundled_tasks(const RecipeBook& book);

std::vector<CraftTask> load_tasks(const std::filesystem::path& path);
void save_tasks(const std::filesystem::path& path, const std::vector<CraftTask>& tasks);

using Inventory = std::map<std::string, int>;

/// "2 log, 1 plank", or "None" when empty.
std::string render_inventory(const Inventory& inv);

/// Commands that take `inv` to at least `want` of `item`, deepest inputs
/// first; `inv` is updated as if they ran.
std::vector<std::string> solve(const RecipeBook& book, Inventory& inv, const ItemCount& want);

struct EnvOptions {
    int max_steps = 40;
};

class TextcraftEnv : public Environment {
public:
    TextcraftEnv(RecipeBook book, CraftTask task, EnvOptions options = {});

    Dialect dialect() const override { return Dialect::Textcraft; }
    std::string id() const override { return task_.id; }
    std::uint64_t seed() const override { return task_.seed; }
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

    const CraftTask& task() const { return task_; }
    const RecipeBook& book() const { return book_; }
    const Inventory& inventory() const { return inventory_; }

private:
    struct Goal {
        std::string text;
        ItemCount want;    // absolute amount required in inventory
    };

    std::string opening(const std::string& goal_text, bool with_inventory) const;

    RecipeBook book_;
    CraftTask task_;
    EnvOptions options_;
    Inventory inventory_;
    Goal goal_;
    Observation initial_;
    bool done_ = false;
    int steps_ = 0;
};

}  // namespace chainstate::textcraft

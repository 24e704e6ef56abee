#include <gtest/gtest.h>

#include <random>

#include "chainstate/assets.hpp"
#include "chainstate/error.hpp"
#include "chainstate/textcraft.hpp"
#include "oracles.hpp"

using namespace chainstate;
using namespace chainstate::textcraft;
using chainstate::testing::data_dir;

namespace {

RecipeBook small_book() {
    return parse_recipe_book(
        "base log\nbase coal\n"
        "craft 1 plank using 1 log\n"
        "craft 1 stick using 1 plank\n"
        "craft 1 torch using 1 coal, 1 stick\n");
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Io;
}

}  // namespace

TEST(TextcraftCommands, Parse) {
    auto c = parse_command("craft 4 glass pane using 6 glass");
    ASSERT_TRUE(c);
    EXPECT_EQ(c->kind, Command::Kind::Craft);
    EXPECT_EQ(c->target, (ItemCount{"glass pane", 4}));
    ASSERT_EQ(c->inputs.size(), 1u);
    auto g = parse_command("get 2 iron ingot");
    ASSERT_TRUE(g);
    EXPECT_EQ(g->target, (ItemCount{"iron ingot", 2}));
    EXPECT_EQ(parse_command("inventory")->kind, Command::Kind::Inventory);
    EXPECT_FALSE(parse_command("dig a hole"));
    EXPECT_FALSE(parse_command("get log"));
}

TEST(TextcraftEnvSteps, ObservationsAndRules) {
    TextcraftEnv env(small_book(), {"t", 0, {"torch", 1}, 3});
    EXPECT_EQ(env.initial_observation().text,
              "Crafting commands:\ncraft 1 plank using 1 log\ncraft 1 stick using 1 plank\n"
              "craft 1 torch using 1 coal, 1 stick\nGoal: craft 1 torch.");
    // A blank line would read as a block boundary inside a prompt.
    EXPECT_EQ(env.initial_observation().text.find("\n\n"), std::string::npos);
    EXPECT_EQ(env.step("inventory").observation.text, "Your inventory is empty.");
    EXPECT_EQ(env.step("get 1 stick").observation.text, "Could not find stick");
    EXPECT_EQ(env.step("get 1 log").observation.text, "Got 1 log");
    EXPECT_FALSE(env.step("craft 1 stick using 1 log").observation.accepted);
    EXPECT_FALSE(env.step("craft 2 plank using 1 log").observation.accepted);
    EXPECT_EQ(env.step("craft 1 plank using 1 log").observation.text, "Crafted 1 plank");
    EXPECT_EQ(env.step("inventory").observation.text, "Inventory: [plank] (1)");
    EXPECT_EQ(env.step("make me a torch").observation.text, "Could not find a valid command.");
    env.step("craft 1 stick using 1 plank");
    env.step("get 1 coal");
    auto out = env.step("craft 1 torch using 1 coal, 1 stick");
    EXPECT_TRUE(out.success);
    EXPECT_TRUE(env.task_solved());
}

TEST(TextcraftBook, ValidationRejectsCyclesAndUnknownInputs) {
    EXPECT_EQ(kind_of([] { parse_recipe_book("base a\ncraft 1 b using 1 c\ncraft 1 c using 1 b\n"); }),
              ErrorKind::Validation);
    EXPECT_EQ(kind_of([] { parse_recipe_book("base a\ncraft 1 b using 1 b\n"); }), ErrorKind::Validation);
    EXPECT_EQ(kind_of([] { parse_recipe_book("base a\ncraft 1 b using 1 zzz\n"); }), ErrorKind::Validation);
    EXPECT_EQ(kind_of([] { recipe_depth(small_book(), "diamond"); }), ErrorKind::UnknownItem);
    EXPECT_EQ(kind_of([] { generate_task(small_book(), 9, 0); }), ErrorKind::NoItemAtDepth);
}

TEST(TextcraftBook, BundledBookHasDepthsTwoToFour) {
    auto book = assets::bundled_recipe_book(data_dir());
    EXPECT_GE(book.recipes().size(), 40u);
    EXPECT_EQ(recipe_depth(book, "plank"), 1);
    EXPECT_EQ(recipe_depth(book, "stick"), 2);
    std::set<int> depths;
    for (const auto& [item, d] : recipe_depths(book)) depths.insert(d);
    for (int d : {2, 3, 4}) EXPECT_TRUE(depths.count(d)) << d;
}

TEST(TextcraftDepth, MatchesExhaustiveSearchOnBundledBook) {
    auto book = assets::bundled_recipe_book(data_dir());
    for (const auto& item : book.items()) {
        auto expected = chainstate::testing::dfs_depth(book, item);
        ASSERT_TRUE(expected) << item;
        EXPECT_EQ(recipe_depth(book, item), *expected) << item;
    }
}

TEST(TextcraftDepth, MatchesExhaustiveSearchOnRandomBooks) {
    std::mt19937_64 rng(2024);
    for (int n = 0; n < 200; ++n) {
        auto book = chainstate::testing::random_book(rng);
        ASSERT_LE(book.recipes().size(), 20u);
        ASSERT_NO_THROW(book.validate());
        for (const auto& item : book.items()) {
            auto expected = chainstate::testing::dfs_depth(book, item);
            ASSERT_TRUE(expected);
            ASSERT_EQ(recipe_depth(book, item), *expected) << "book " << n << " item " << item << "\n"
                                                            << dump_recipe_book(book);
        }
    }
}

TEST(TextcraftTasks, BundledListMatchesGenerator) {
    auto book = assets::bundled_recipe_book(data_dir());
    auto tasks = assets::bundled_textcraft_tasks(data_dir());
    EXPECT_EQ(tasks, bundled_tasks(book));
    ASSERT_EQ(tasks.size(), 30u);
    std::map<int, int> per;
    for (const auto& t : tasks) {
        ++per[t.depth];
        EXPECT_EQ(recipe_depth(book, t.target.item), t.depth) << t.id;
    }
    EXPECT_EQ(per[2], 10);
    EXPECT_EQ(per[3], 10);
    EXPECT_EQ(per[4], 10);
}

TEST(TextcraftSolve, ProducesExactlyTheRequestedItem) {
    auto book = assets::bundled_recipe_book(data_dir());
    for (const auto& item : book.items()) {
        if (book.is_base(item)) continue;
        Inventory inv;
        auto cmds = solve(book, inv, {item, 2});
        TextcraftEnv env(book, {"x", 0, {item, 2}, recipe_depth(book, item)});
        for (const auto& c : cmds) ASSERT_TRUE(env.step(c).observation.accepted) << item << ": " << c;
        EXPECT_TRUE(env.task_solved()) << item;
        EXPECT_GE(inv[item], 2);
    }
}

TEST(TextcraftSubtasks, RelativeGain) {
    TextcraftEnv env(small_book(), {"t", 0, {"torch", 1}, 3});
    env.step("get 1 log");
    auto o = env.begin_subtask("get 1 log");
    ASSERT_TRUE(o);
    EXPECT_FALSE(env.task_solved());
    EXPECT_NE(o->text.find("1 log"), std::string::npos);
    env.step("get 1 log");
    EXPECT_TRUE(env.task_solved());
    EXPECT_FALSE(env.begin_subtask("build a castle"));
}

TEST(TextcraftInventory, Render) {
    EXPECT_EQ(render_inventory({}), "None");
    EXPECT_EQ(render_inventory({{"log", 2}, {"plank", 1}}), "2 log, 1 plank");
}

#include <gtest/gtest.h>

#include "chainstate/assets.hpp"
#include "chainstate/eval.hpp"
#include "chainstate/household.hpp"
#include "chainstate/textcraft.hpp"
#include "oracles.hpp"

using namespace chainstate;
using chainstate::testing::data_dir;

namespace {

struct Tally {
    int solved = 0;
    int total = 0;
    std::vector<agent::StepRecord> records;
};

// Runs the scripted solver and checks, after every step, that the tracker
// fed only actions and observations agrees with the environment's truth.
void run_one(Environment& env, const AgentVariant& v, const codec::FewShotSet& shots, int budget, Tally& t) {
    backend::OracleBackend oracle(env, v);
    GoldState tracked = env.ground_truth();
    agent::EpisodeOptions opts;
    opts.on_step = [&](const agent::StepRecord& rec, const Environment& live) {
        EXPECT_EQ(rec.gold_state, tracked) << env.id() << " step " << rec.step;
        tracked = live.gold_update(tracked, rec.normalized_action, *rec.observation);
        EXPECT_EQ(tracked, live.ground_truth()) << env.id() << " after " << rec.normalized_action;
    };
    auto r = agent::run_episode(env, v, oracle, shots, budget, opts);
    ++t.total;
    if (r.success) ++t.solved;
    EXPECT_TRUE(r.success) << env.id() << " " << agent::to_string(r.termination);
    EXPECT_LE(r.steps_taken, budget);
    t.records.insert(t.records.end(), r.records.begin(), r.records.end());
}

}  // namespace

TEST(Oracle, SolvesEveryBundledHouseholdWorld) {
    auto v = full_variant(Dialect::Household);
    Tally t;
    for (const auto& spec : assets::bundled_worlds(data_dir())) {
        household::HouseholdEnv env(spec);
        auto shots = assets::household_few_shot(data_dir(), spec.task.kind);
        run_one(env, v, shots, 50, t);
    }
    EXPECT_EQ(t.total, 24);
    EXPECT_EQ(t.solved, 24);
    EXPECT_DOUBLE_EQ(eval::state_accuracy(t.records, v).overall, 1.0);
}

TEST(Oracle, SolvesEveryBundledTextcraftTask) {
    auto v = full_variant(Dialect::Textcraft);
    auto book = assets::bundled_recipe_book(data_dir());
    auto shots = assets::textcraft_few_shot(data_dir());
    Tally t;
    for (const auto& task : assets::bundled_textcraft_tasks(data_dir())) {
        textcraft::TextcraftEnv env(book, task);
        run_one(env, v, shots, 40, t);
    }
    EXPECT_EQ(t.total, 30);
    EXPECT_EQ(t.solved, 30);
    EXPECT_DOUBLE_EQ(eval::state_accuracy(t.records, v).overall, 1.0);
}

TEST(Oracle, GeneratedHouseholdWorldsAreSolvable) {
    auto v = full_variant(Dialect::Household);
    Tally t;
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        auto kind = household::kind_for_seed(seed);
        household::HouseholdEnv env(household::generate_world(seed, kind));
        run_one(env, v, assets::household_few_shot(data_dir(), kind), 50, t);
    }
    EXPECT_EQ(t.solved, t.total);
}

TEST(Oracle, MoveSyntaxWorldsAreSolvable) {
    auto v = full_variant(Dialect::Household);
    Tally t;
    for (const auto& spec : assets::bundled_worlds(data_dir())) {
        household::HouseholdEnv env(spec, {true, 50});
        run_one(env, v, assets::household_few_shot(data_dir(), spec.task.kind), 50, t);
    }
    EXPECT_EQ(t.solved, 24);
}

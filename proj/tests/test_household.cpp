#include <gtest/gtest.h>

#include "chainstate/assets.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/error.hpp"
#include "chainstate/household.hpp"
#include "oracles.hpp"

using namespace chainstate;
using namespace chainstate::household;
using chainstate::testing::data_dir;
using chainstate::testing::fixture_dir;

namespace {

// Replays an asset example's actions and checks every observation and o_0.
void expect_example_replays(const Trace& example, const WorldSpec& spec) {
    HouseholdEnv env(spec);
    EXPECT_EQ(env.initial_observation().text, example.initial.text);
    for (const auto& step : example.steps) {
        auto out = env.step(step.context.action);
        EXPECT_TRUE(out.observation.accepted) << step.context.action;
        if (step.observation) {
            EXPECT_EQ(out.observation.text, step.observation->text) << step.context.action;
        }
    }
    EXPECT_TRUE(env.task_solved());
}

}  // namespace

TEST(HouseholdNormalize, InOnSpellingsCollapse) {
    auto canonical = HouseholdAction{Verb::Put, {"apple 1", "fridge 1"}};
    for (auto text : {"put apple 1 in fridge 1", "put apple 1 on fridge 1", "put apple 1 in/on fridge 1",
                      "Put Apple 1 In Fridge 1", "  put apple 1 into fridge 1 "}) {
        EXPECT_EQ(normalize_action(text), canonical) << text;
    }
    EXPECT_EQ(canonical.canonical(), "put apple 1 in/on fridge 1");
    EXPECT_EQ(canonical.canonical(true), "move apple 1 to fridge 1");
}

TEST(HouseholdNormalize, MoveToOnlyUnderMoveSyntax) {
    EXPECT_FALSE(try_normalize_action("move apple 1 to fridge 1"));
    auto a = normalize_action("move apple 1 to fridge 1", {true});
    EXPECT_EQ(a, (HouseholdAction{Verb::Put, {"apple 1", "fridge 1"}}));
    EXPECT_EQ(normalize_action("put apple 1 in fridge 1", {true}), a);
}

TEST(HouseholdNormalize, OtherVerbs) {
    EXPECT_EQ(normalize_action("go to cabinet 13").canonical(), "go to cabinet 13");
    EXPECT_EQ(normalize_action("take egg 2 from countertop 3").canonical(), "take egg 2 from countertop 3");
    EXPECT_EQ(normalize_action("heat egg 2 with microwave 1").canonical(), "heat egg 2 with microwave 1");
    EXPECT_EQ(normalize_action("clean cup 1 with sinkbasin 1").verb, Verb::Clean);
    EXPECT_EQ(normalize_action("use desklamp 1").verb, Verb::Use);
}

TEST(HouseholdNormalize, OutOfGrammarThrowsTypedError) {
    for (auto text : {"", "dance", "go to", "put apple in fridge 1", "take apple 1", "go to fridge one"}) {
        try {
            normalize_action(text);
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::UnrecognizedAction) << text;
        }
    }
}

TEST(HouseholdEnvSteps, RejectionsNeverCrash) {
    HouseholdEnv env(load_world(fixture_dir() / "worlds/transcribed_heat.json"));
    for (auto text : {"", "fly away", "take apple 1 from fridge 1", "open diningtable 1", "put apple 1 in fridge 1",
                      "go to spaceship 1", "heat apple 1 with microwave 1", "use desklamp 1", "\n\n", "think: hmm"}) {
        auto out = env.step(text);
        EXPECT_FALSE(out.observation.accepted) << text;
        EXPECT_EQ(out.observation.text, kRejected);
        EXPECT_FALSE(out.done);
    }
}

TEST(HouseholdEnvSteps, TranscribedObservations) {
    HouseholdEnv env(load_world(fixture_dir() / "worlds/transcribed_heat.json"));
    EXPECT_EQ(env.step("go to fridge 1").observation.text, "The fridge 1 is closed.");
    env.step("go to diningtable 1");
    env.step("take apple 1 from diningtable 1");
    env.step("go to microwave 1");
    auto heat = env.step("heat apple 1 with microwave 1");
    EXPECT_TRUE(heat.observation.accepted);
    EXPECT_EQ(heat.observation.text, "You heat the apple 1 using the microwave 1.");
}

TEST(HouseholdEnvSteps, TranscribedHeatExamplesReplayVerbatim) {
    auto shots = assets::household_few_shot(data_dir(), TaskKind::Heat);
    ASSERT_EQ(shots.examples.size(), 2u);
    expect_example_replays(shots.examples[0], load_world(fixture_dir() / "worlds/transcribed_heat.json"));
    expect_example_replays(shots.examples[1], load_world(fixture_dir() / "worlds/transcribed_heat_egg.json"));
}

TEST(HouseholdEnvSteps, FinishedEpisodeRefusesSteps) {
    auto spec = load_world(fixture_dir() / "worlds/transcribed_heat.json");
    HouseholdEnv env(spec);
    for (const auto& a : env.oracle_rollout()) env.step(a);
    ASSERT_TRUE(env.task_solved());
    try {
        env.step("look");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EpisodeFinished);
    }
}

TEST(HouseholdEnvSteps, MoveSyntaxObservation) {
    HouseholdEnv env(load_world(fixture_dir() / "worlds/transcribed_heat.json"), {true, 50});
    env.step("go to diningtable 1");
    env.step("take apple 1 from diningtable 1");
    auto out = env.step("move apple 1 to diningtable 1");
    EXPECT_TRUE(out.observation.accepted);
    EXPECT_EQ(out.observation.text, "You move the apple 1 to the diningtable 1.");
}

TEST(HouseholdGeneration, DeterministicAndListsDescendingIndices) {
    auto a = generate_world(0, TaskKind::Heat);
    auto b = generate_world(0, TaskKind::Heat);
    EXPECT_EQ(dump_world(a), dump_world(b));
    HouseholdEnv env(a);
    const auto& text = env.initial_observation().text;
    EXPECT_EQ(text.rfind("You are in the middle of a room. Looking quickly around you, you see ", 0), 0u);
    EXPECT_NE(text.find("\nYour task is to: put a hot "), std::string::npos);
    // Within one type, higher indices come first.
    for (const auto& r : a.receptacles) {
        auto type = entity_type(r.name);
        auto later = text.find("a " + type + " 1,");
        auto earlier = text.find("a " + type + " 2,");
        if (earlier != std::string::npos && later != std::string::npos) {
            EXPECT_LT(earlier, later) << type;
        }
    }
}

TEST(HouseholdGeneration, EveryKindRoundTripsThroughJson) {
    for (auto kind : kTaskKinds) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto spec = generate_world(seed, kind);
            EXPECT_EQ(dump_world(parse_world(dump_world(spec))), dump_world(spec));
            EXPECT_FALSE(HouseholdEnv(spec).task_solved()) << spec.id;
        }
    }
}

TEST(HouseholdGeneration, BundledWorldsCoverEveryKindFourTimes) {
    auto worlds = assets::bundled_worlds(data_dir());
    ASSERT_EQ(worlds.size(), 24u);
    std::map<TaskKind, int> per;
    for (const auto& w : worlds) ++per[w.task.kind];
    for (auto kind : kTaskKinds) EXPECT_EQ(per[kind], 4) << to_string(kind);
}

TEST(HouseholdWorldFile, ValidationRejectsDanglingPlacement) {
    auto spec = load_world(fixture_dir() / "worlds/transcribed_heat.json");
    spec.objects.push_back({"apple 9", "cabinet 99"});
    EXPECT_THROW(spec.validate(), Error);
    EXPECT_THROW(parse_world("{not json"), Error);
}

TEST(HouseholdGold, TranscribedHeuristicExamples) {
    HouseholdEnv env(load_world(fixture_dir() / "worlds/transcribed_heat.json"));
    GoldState s;
    s.fields.set("current location", "table 1");
    s.fields.set("current inventory", "None");
    auto moved = env.gold_update(s, "go to fridge 1", {1, "The fridge 1 is closed.", true});
    EXPECT_EQ(moved.get("current location"), "fridge 1");
    GoldState t;
    t.fields.set("current location", "diningtable 1");
    t.fields.set("current inventory", "None");
    auto took = env.gold_update(t, "take apple 1 from diningtable 1",
                                {1, "You pick up the apple 1 from the diningtable 1.", true});
    EXPECT_EQ(took.get("current inventory"), "apple 1");
    auto rejected = env.gold_update(t, "take apple 1 from diningtable 1", {1, std::string(kRejected), false});
    EXPECT_EQ(rejected.get("current inventory"), "None");
}

TEST(HouseholdSubtasks, GrammarAndCompletion) {
    HouseholdEnv env(load_world(fixture_dir() / "worlds/transcribed_heat.json"));
    EXPECT_FALSE(env.begin_subtask("juggle three apples"));
    auto o = env.begin_subtask("find and take an apple");
    ASSERT_TRUE(o);
    EXPECT_NE(o->text.find("Your task is to: find and take an apple."), std::string::npos);
    env.step("go to diningtable 1");
    auto out = env.step("take apple 1 from diningtable 1");
    EXPECT_TRUE(out.success);
    ASSERT_TRUE(env.begin_subtask("heat the apple"));
    EXPECT_NE(env.initial_observation().text.find("You are carrying the apple 1."), std::string::npos);
    for (const auto& a : env.oracle_rollout()) env.step(a);
    EXPECT_TRUE(env.task_solved());
    ASSERT_TRUE(env.begin_subtask("put the apple in/on fridge"));
    for (const auto& a : env.oracle_rollout()) env.step(a);
    EXPECT_TRUE(env.task_solved());
    ASSERT_TRUE(env.begin_subtask("put a hot apple in fridge"));
    EXPECT_TRUE(env.task_solved());
}

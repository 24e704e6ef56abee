#include <gtest/gtest.h>

#include <sstream>

#include "chainstate/agent.hpp"
#include "chainstate/assets.hpp"
#include "chainstate/error.hpp"
#include "chainstate/household.hpp"
#include "oracles.hpp"
#include "scripted_backend.hpp"

using namespace chainstate;
using chainstate::testing::data_dir;
using chainstate::testing::fixture_dir;
using chainstate::testing::ScriptedBackend;

namespace {

household::HouseholdEnv transcribed_env() {
    return household::HouseholdEnv(household::load_world(fixture_dir() / "worlds/transcribed_heat.json"));
}

std::string block(const std::string& goal, const std::string& action) {
    return ">goal: " + goal + "\ncurrent location: somewhere\ncurrent inventory: None\nthought: None\naction: " + action;
}

}  // namespace

TEST(ExtractGoal, Dialects) {
    Observation h{0, "You are in the middle of a room. Looking quickly around you, you see a fridge 1.\n"
                     "Your task is to: put a hot apple in fridge.", true};
    EXPECT_EQ(agent::extract_goal(h, Dialect::Household), "put a hot apple in fridge");
    Observation w{0, "Webshop \nInstruction:  \ni would like a 3 ounce bottle of deodorant \n[Search]  ", true};
    EXPECT_EQ(agent::extract_goal(w, Dialect::Webshop), "i would like a 3 ounce bottle of deodorant");
    Observation t{0, "Crafting commands:\ncraft 1 stick using 1 plank\n\nGoal: craft 2 stick.", true};
    EXPECT_EQ(agent::extract_goal(t, Dialect::Textcraft), "craft 2 stick");
    try {
        agent::extract_goal({0, "no marker here", true}, Dialect::Household);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingTaskMarker);
    }
}

TEST(RunEpisode, ReplayOfTranscribedReproducesEveryBlock) {
    auto env = transcribed_env();
    backend::ReplayStore store(data_dir() / "replay/transcribed_heat.jsonl");
    auto shots = assets::household_few_shot(data_dir(), household::TaskKind::Heat);
    const auto& expected = shots.examples.at(0);
    agent::EpisodeOptions opts;
    opts.episode_id = "transcribed-heat";
    auto r = agent::run_episode(env, full_variant(Dialect::Household), store, shots, 50, opts);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.termination, agent::Termination::Solved);
    ASSERT_EQ(r.records.size(), expected.steps.size());
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        ASSERT_TRUE(r.records[i].context);
        EXPECT_EQ(*r.records[i].context, expected.steps[i].context) << "step " << i;
        EXPECT_FALSE(r.records[i].goal_drift);
        EXPECT_TRUE(r.records[i].recoveries.empty());
        if (expected.steps[i].observation) {
            EXPECT_EQ(r.records[i].observation->text, expected.steps[i].observation->text);
        }
    }
    EXPECT_EQ(r.records[7].normalized_action, "put apple 1 in/on fridge 1");
}

TEST(RunEpisode, GoalIsPinnedAndDriftFlagged) {
    auto env = transcribed_env();
    auto backend = ScriptedBackend::sequence({block("put a cold apple in sink", "go to fridge 1"),
                                              block("put a hot apple in fridge.", "look")});
    codec::FewShotSet none{Dialect::Household, {}, {}};
    auto r = agent::run_episode(env, full_variant(Dialect::Household), backend, none, 3);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_TRUE(r.records[0].goal_drift);
    EXPECT_EQ(*r.records[0].context->goal, "put a hot apple in fridge");
    EXPECT_FALSE(r.records[1].goal_drift);
    EXPECT_EQ(r.termination, agent::Termination::StepLimit);
    EXPECT_FALSE(r.success);
    EXPECT_FALSE(r.records[1].accepted);
    // The pinned goal is what the model sees next.
    auto reqs = backend.requests();
    EXPECT_EQ(reqs[1].prompt.find("put a cold apple in sink"), std::string::npos);
    EXPECT_EQ(reqs[0].step, 0);
    EXPECT_EQ(reqs[2].step, 2);
}

TEST(RunEpisode, ParseFailureTerminates) {
    auto env = transcribed_env();
    auto backend = ScriptedBackend::sequence({"I am not sure what to do."});
    codec::FewShotSet none{Dialect::Household, {}, {}};
    auto r = agent::run_episode(env, full_variant(Dialect::Household), backend, none, 50);
    EXPECT_EQ(r.termination, agent::Termination::ParseFailure);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_FALSE(r.records[0].context);
    EXPECT_EQ(backend.requests().size(), 1u);
}

TEST(RunEpisode, BackendErrorTerminatesWithoutThrowing) {
    auto env = transcribed_env();
    ScriptedBackend backend([](const backend::CompletionRequest&) -> std::string {
        throw Error(ErrorKind::BackendError, "connection refused");
    });
    codec::FewShotSet none{Dialect::Household, {}, {}};
    agent::EpisodeResult r;
    ASSERT_NO_THROW(r = agent::run_episode(env, full_variant(Dialect::Household), backend, none, 50));
    EXPECT_EQ(r.termination, agent::Termination::BackendError);
    EXPECT_NE(r.records.at(0).error.find("connection refused"), std::string::npos);
}

TEST(RunEpisode, OracleSolvesTranscribedWorldWithAccurateState) {
    auto env = transcribed_env();
    auto v = full_variant(Dialect::Household);
    backend::OracleBackend oracle(env, v);
    auto shots = assets::household_few_shot(data_dir(), household::TaskKind::Heat);
    auto r = agent::run_episode(env, v, oracle, shots, 50);
    EXPECT_TRUE(r.success);
    for (const auto& rec : r.records)
        EXPECT_EQ(rec.context->state, rec.gold_state.project(state_keys(v)).fields) << rec.step;
}

TEST(Persistence, JsonlRoundTrip) {
    auto env = transcribed_env();
    backend::ReplayStore store(data_dir() / "replay/transcribed_heat.jsonl");
    auto shots = assets::household_few_shot(data_dir(), household::TaskKind::Heat);
    agent::EpisodeOptions opts;
    opts.episode_id = "transcribed-heat";
    auto v = full_variant(Dialect::Household);
    auto r = agent::run_episode(env, v, store, shots, 50, opts);
    std::stringstream ss;
    agent::write_episode(ss, r, v);
    std::string line;
    std::vector<nlohmann::json> lines;
    while (std::getline(ss, line)) lines.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(lines.size(), r.records.size() + 2);
    EXPECT_EQ(lines.front()["type"], "header");
    EXPECT_EQ(lines.front()["variant"]["label"], v.label());
    EXPECT_EQ(agent::variant_from_json(lines.front()["variant"]).include_state, true);
    EXPECT_EQ(lines.back()["termination"], "Solved");
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        auto back = agent::step_from_json(lines[i + 1]);
        EXPECT_EQ(back.context, r.records[i].context);
        EXPECT_EQ(back.gold_state, r.records[i].gold_state);
        EXPECT_EQ(back.normalized_action, r.records[i].normalized_action);
    }
    EXPECT_EQ(agent::parse_termination("steplimit"), agent::Termination::StepLimit);
}

#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chainstate/adapt.hpp"
#include "chainstate/assets.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/error.hpp"
#include "chainstate/eval.hpp"
#include "chainstate/household.hpp"
#include "chainstate/textcraft.hpp"
#include "oracles.hpp"
#include "scripted_backend.hpp"
#include "stub_server.hpp"

using namespace chainstate;
using chainstate::testing::data_dir;

namespace {

// Collects the first failure of a criterion; later checks are still run.
struct Check {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    bool ok() const { return failures.empty(); }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void codec_fidelity(Check& c) {
    auto start = Clock::now();
    for (auto [path, dialect] : {std::pair{data_dir() / "fewshot/household/heat.txt", Dialect::Household},
                                 std::pair{data_dir() / "fewshot/webshop/search.txt", Dialect::Webshop}}) {
        auto text = assets::read_text(path);
        auto doc = codec::parse_prompt_document(text, dialect);
        c.expect(doc.recoveries == 0, path.filename().string() + " needed recoveries");
        c.expect(!doc.examples.empty(), path.filename().string() + " has no examples");
        c.expect(codec::serialize_prompt_document(doc, full_variant(dialect)) == text,
                 path.filename().string() + " does not re-serialize byte for byte");
    }
    auto t = seconds_since(start);
    c.expect(t < 1.0, "took " + std::to_string(t) + " s");
}

void round_trip(Check& c) {
    auto start = Clock::now();
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (auto dialect : {Dialect::Household, Dialect::Webshop, Dialect::Textcraft})
        for (auto format : {Format::PlainText, Format::Json})
            for (const auto& v : ablation_variants(dialect, format))
                for (int i = 0; i < 1000; ++i) {
                    auto ctx = chainstate::testing::random_context(rng, v);
                    auto text = codec::serialize_context(ctx, v);
                    try {
                        if (codec::parse_completion(text, v).context != ctx) {
                            c.expect(false, v.label() + " mismatch on: " + text);
                            return;
                        }
                    } catch (const Error& e) {
                        c.expect(false, v.label() + " threw " + e.what());
                        return;
                    }
                    ++checked;
                }
    c.expect(checked == 3 * 2 * 8 * 1000, "checked " + std::to_string(checked));
    auto t = seconds_since(start);
    c.expect(t < 30.0, "took " + std::to_string(t) + " s");
}

void normalization(Check& c) {
    using household::ActionSyntax;
    auto want = household::normalize_action("put apple 1 in/on fridge 1");
    for (const char* s : {"put apple 1 in fridge 1", "put apple 1 on fridge 1", "put apple 1 in/on fridge 1"})
        c.expect(household::normalize_action(s) == want, std::string("'") + s + "' differs");
    c.expect(household::normalize_action("move apple 1 to fridge 1", ActionSyntax{true}) == want,
             "move-to spelling differs");
    c.expect(!household::try_normalize_action("move apple 1 to fridge 1"), "move-to accepted without move syntax");

    household::HouseholdEnv env(household::load_world(chainstate::testing::fixture_dir() / "worlds/transcribed_heat.json"));
    auto before = env.ground_truth();
    for (const char* s : {"", "dance wildly", "take unicorn 1 from fridge 1", "put apple 1 in fridge 1",
                          "go to moon 3", "open", "heat apple 1 with fridge 1", "\n\n", "look"}) {
        try {
            auto out = env.step(s);
            c.expect(!out.observation.accepted, std::string("'") + s + "' accepted");
            c.expect(out.observation.text == household::kRejected, std::string("'") + s + "' -> " + out.observation.text);
        } catch (const std::exception& e) {
            c.expect(false, std::string("'") + s + "' threw " + e.what());
        }
    }
    c.expect(env.ground_truth() == before, "rejected actions changed the world");
}

struct OracleRuns {
    int household_solved = 0, household_total = 0, household_over = 0;
    int textcraft_solved = 0, textcraft_total = 0, textcraft_over = 0;
    int gold_steps = 0, gold_mismatch = 0;
    std::vector<std::string> notes;
    std::vector<agent::StepRecord> household_records, textcraft_records;
};

void run_oracle(Environment& env, const AgentVariant& v, const codec::FewShotSet& shots, int budget, OracleRuns& o,
                bool& solved, bool& over, std::vector<agent::StepRecord>& records) {
    backend::OracleBackend oracle(env, v);
    GoldState tracked = env.ground_truth();
    agent::EpisodeOptions opts;
    opts.on_step = [&](const agent::StepRecord& rec, const Environment& live) {
        ++o.gold_steps;
        if (!(rec.gold_state == tracked)) ++o.gold_mismatch;
        tracked = live.gold_update(tracked, rec.normalized_action, *rec.observation);
        if (!(tracked == live.ground_truth())) {
            ++o.gold_mismatch;
            o.notes.push_back(env.id() + " after '" + rec.normalized_action + "'");
        }
    };
    auto r = agent::run_episode(env, v, oracle, shots, budget, opts);
    solved = r.success;
    over = r.steps_taken > budget;
    if (!r.success) o.notes.push_back(env.id() + " unsolved");
    records.insert(records.end(), r.records.begin(), r.records.end());
}

OracleRuns oracle_runs() {
    OracleRuns o;
    auto hv = full_variant(Dialect::Household);
    for (const auto& spec : assets::bundled_worlds(data_dir())) {
        household::HouseholdEnv env(spec);
        bool solved = false, over = false;
        run_oracle(env, hv, assets::household_few_shot(data_dir(), spec.task.kind), 50, o, solved, over,
                   o.household_records);
        ++o.household_total;
        o.household_solved += solved;
        o.household_over += over;
    }
    auto tv = full_variant(Dialect::Textcraft);
    auto book = assets::bundled_recipe_book(data_dir());
    auto shots = assets::textcraft_few_shot(data_dir());
    for (const auto& task : assets::bundled_textcraft_tasks(data_dir())) {
        textcraft::TextcraftEnv env(book, task);
        bool solved = false, over = false;
        run_oracle(env, tv, shots, 40, o, solved, over, o.textcraft_records);
        ++o.textcraft_total;
        o.textcraft_solved += solved;
        o.textcraft_over += over;
    }
    return o;
}

void oracle_end_to_end(Check& c, const OracleRuns& o) {
    c.expect(o.household_total == 24 && o.household_solved == 24,
             "household " + std::to_string(o.household_solved) + "/" + std::to_string(o.household_total));
    c.expect(o.textcraft_total == 30 && o.textcraft_solved == 30,
             "textcraft " + std::to_string(o.textcraft_solved) + "/" + std::to_string(o.textcraft_total));
    c.expect(o.household_over == 0 && o.textcraft_over == 0, "budget exceeded");
    std::map<household::TaskKind, int> per_kind;
    for (const auto& spec : assets::bundled_worlds(data_dir())) ++per_kind[spec.task.kind];
    for (auto k : household::kTaskKinds)
        c.expect(per_kind[k] == 4, std::string(household::to_string(k)) + " has " + std::to_string(per_kind[k]));
    std::map<int, int> per_depth;
    for (const auto& t : assets::bundled_textcraft_tasks(data_dir())) ++per_depth[t.depth];
    c.expect(per_depth == std::map<int, int>{{2, 10}, {3, 10}, {4, 10}}, "textcraft depth mix");
    for (const auto& n : o.notes) c.expect(n.find("unsolved") == std::string::npos, n);
}

void gold_soundness(Check& c, const OracleRuns& o) {
    c.expect(o.gold_steps > 0, "no steps");
    c.expect(o.gold_mismatch == 0, std::to_string(o.gold_mismatch) + " mismatches of " + std::to_string(o.gold_steps) +
                                       (o.notes.empty() ? "" : ", first: " + o.notes.front()));
    auto h = eval::state_accuracy(o.household_records, full_variant(Dialect::Household)).overall;
    auto t = eval::state_accuracy(o.textcraft_records, full_variant(Dialect::Textcraft)).overall;
    c.expect(h == 1.0, "household state accuracy " + std::to_string(h));
    c.expect(t == 1.0, "textcraft state accuracy " + std::to_string(t));
}

void metrics_fixtures(Check& c) {
    using eval::EpisodeSummary;
    std::vector<EpisodeSummary> three{{"a", true, 5, 50}, {"b", true, 10, 50}, {"c", true, 15, 50}};
    c.expect(eval::avg_steps(three, eval::StepScope::All) == 10.0, "avg_steps {5,10,15}");
    std::vector<EpisodeSummary> four{{"a", true, 3, 50}, {"b", true, 12, 50}, {"c", true, 44, 50}, {"d", false, 50, 50}};
    auto b = eval::bucket_success(four);
    std::vector<std::tuple<std::string, int, int>> want{
        {"1-10", 1, 1}, {"11-20", 1, 1}, {"21-30", 0, 0}, {"31-40", 0, 0}, {"41-50", 2, 1}};
    c.expect(b.size() == want.size(), "bucket count " + std::to_string(b.size()));
    for (std::size_t i = 0; i < std::min(b.size(), want.size()); ++i)
        c.expect(b[i].label() == std::get<0>(want[i]) && b[i].attempted == std::get<1>(want[i]) &&
                     b[i].solved == std::get<2>(want[i]),
                 "bucket " + b[i].label());
}

std::string textcraft_block(const std::string& action) {
    auto v = full_variant(Dialect::Textcraft);
    AgentContext ctx;
    ctx.goal = "x";
    ctx.state = StateFields{};
    for (const auto& k : state_keys(v)) ctx.state->set(k, "None");
    ctx.action = action;
    return codec::serialize_context(ctx, v);
}

void depth_invariant(Check& c) {
    auto book = assets::bundled_recipe_book(data_dir());
    auto v = full_variant(Dialect::Textcraft);
    codec::FewShotSet none{Dialect::Textcraft, {}, {}};
    adapt::PlannerPrompt planner{"Break the task into numbered subtasks."};

    {
        textcraft::TextcraftEnv env(book, {"stick", 0, {"stick", 1}, 2});
        auto act = chainstate::testing::ScriptedBackend::sequence({textcraft_block("inventory")});
        auto plan = chainstate::testing::ScriptedBackend::sequence({"1. craft 1 stick\n2. get 1 log"});
        adapt::AdaptOptions opts;
        opts.d_max = 2;
        opts.max_steps = 2;
        auto r = adapt::run_adapt("craft 1 stick", env, v, act, plan, none, planner, opts);
        int deepest = 0;
        for (const auto* n : adapt::flatten(r.root)) deepest = std::max(deepest, n->depth);
        c.expect(deepest <= 2, "node at depth " + std::to_string(deepest));
        c.expect(deepest == 2, "always-decompose planner stopped at depth " + std::to_string(deepest));
    }
    {
        textcraft::TextcraftEnv env(book, {"plank", 0, {"plank", 1}, 1});
        chainstate::testing::ScriptedBackend act([&](const backend::CompletionRequest& req) {
            return textcraft_block(req.episode_id == "plank" ? "inventory" : env.oracle_action());
        });
        auto plan = chainstate::testing::ScriptedBackend::sequence({"1. get 1 log\n2. craft 1 plank using 1 log"});
        adapt::AdaptOptions opts;
        opts.d_max = 2;
        opts.max_steps = 3;
        auto r = adapt::run_adapt("craft 1 plank", env, v, act, plan, none, planner, opts);
        c.expect(r.success, "fail-then-decompose did not succeed");
        c.expect(r.max_depth == 1, "decomposition levels " + std::to_string(r.max_depth));
        c.expect(r.root.outcome == adapt::NodeOutcome::Decomposed, "root was not decomposed");
    }
}

void prompt_size(Check& c) {
    auto stateact = full_variant(Dialect::Household);
    auto react = stateact;
    react.include_goal = false;
    react.include_state = false;
    int examples = 0;
    for (auto kind : household::kTaskKinds) {
        for (const auto& ex : assets::household_few_shot(data_dir(), kind).examples) {
            ++examples;
            auto s = codec::word_count(codec::render_example(ex, stateact));
            auto r = codec::word_count(codec::render_example(ex, react));
            std::string k(household::to_string(kind));
            c.expect(s >= 484 && s <= 911, k + " StateAct example has " + std::to_string(s) + " words");
            c.expect(r >= 352 && r <= 591, k + " ReAct example has " + std::to_string(r) + " words");
        }
    }
    c.expect(examples == 12, std::to_string(examples) + " household examples");
}

void backend_defaults(Check& c) {
    auto req = backend::make_request("hello");
    auto wire = req.to_wire("m");
    c.expect(wire["temperature"].get<double>() == 0.0, "temperature");
    c.expect(wire["top_p"].get<double>() == 1.0, "top_p");
    c.expect(wire["stop"] == nlohmann::json::array({"\n\n"}), "stop");

    ::setenv("CHAINSTATE_ACCEPTANCE_KEY", "unused", 1);
    std::mt19937_64 rng(5);
    std::mutex m;
    chainstate::testing::StubServer server([&](const nlohmann::json&) {
        std::lock_guard lock(m);
        return chainstate::testing::fuzz_completion(rng);
    });
    backend::HttpConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "stub";
    cfg.api_key_env = "CHAINSTATE_ACCEPTANCE_KEY";
    cfg.timeout_seconds = 5;
    backend::HttpBackend http(cfg);
    for (int i = 0; i < 300; ++i) {
        auto r = backend::make_request("p");
        auto text = http.complete(r);
        if (text.find("\n\n") != std::string::npos) {
            c.expect(false, "response " + std::to_string(i) + " contains a stop sequence");
            break;
        }
    }
}

void depth_oracle(Check& c) {
    auto book = assets::bundled_recipe_book(data_dir());
    for (const auto& item : book.items()) {
        auto want = chainstate::testing::dfs_depth(book, item);
        c.expect(want && textcraft::recipe_depth(book, item) == *want, "bundled item " + item);
    }
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        auto b = chainstate::testing::random_book(rng, 20);
        c.expect(b.recipes().size() <= 20, "random book too large");
        for (const auto& item : b.items()) {
            auto want = chainstate::testing::dfs_depth(b, item);
            if (!want) continue;
            if (textcraft::recipe_depth(b, item) != *want) {
                c.expect(false, "random book " + std::to_string(trial) + " item " + item);
                break;
            }
        }
    }
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria;
    std::optional<OracleRuns> runs;
    auto oracle = [&]() -> const OracleRuns& {
        if (!runs) runs = oracle_runs();
        return *runs;
    };
    criteria.push_back({"codec fidelity", codec_fidelity});
    criteria.push_back({"round-trip property", round_trip});
    criteria.push_back({"action normalization", normalization});
    criteria.push_back({"oracle end-to-end", [&](Check& c) { oracle_end_to_end(c, oracle()); }});
    criteria.push_back({"gold-state soundness", [&](Check& c) { gold_soundness(c, oracle()); }});
    criteria.push_back({"metrics fixtures", metrics_fixtures});
    criteria.push_back({"depth invariant", depth_invariant});
    criteria.push_back({"prompt-size sanity", prompt_size});
    criteria.push_back({"backend defaults", backend_defaults});
    criteria.push_back({"recipe-depth oracle equivalence", depth_oracle});

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.ok() ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].first;
        if (!c.ok()) {
            std::cout << " (" << c.failures.front();
            if (c.failures.size() > 1) std::cout << "; " << c.failures.size() - 1 << " more";
            std::cout << ")";
            ++failed;
        }
        std::cout << "\n";
    }
    return failed == 0 ? 0 : 1;
}

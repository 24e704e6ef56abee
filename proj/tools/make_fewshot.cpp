// Builds the household few-shot files for task kinds other than heat by
// rolling the scripted solver out in large generated rooms.
//
//   make_fewshot <out_dir> [kind ...]
//   make_fewshot <out_dir> textcraft <recipes.txt> <item> <item>
//   make_fewshot <data_dir> manifest

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/agent.hpp"
#include "chainstate/assets.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/household.hpp"
#include "chainstate/strings.hpp"
#include "chainstate/textcraft.hpp"

namespace fs = std::filesystem;
using namespace chainstate;
using household::TaskKind;

namespace {

constexpr std::size_t kStateActMin = 484, kStateActMax = 911;
constexpr std::size_t kReActMin = 352, kReActMax = 591;

std::string article(const std::string& word) {
    return std::string("aeiou").find(word.front()) != std::string::npos ? "an" : "a";
}

std::string a(const std::string& word) { return article(word) + " " + word; }

// "apple 1" -> "apple (1)"
std::string numbered(const std::string& name) {
    auto sp = name.rfind(' ');
    return name.substr(0, sp) + " (" + name.substr(sp + 1) + ")";
}

std::string treat_verb(TaskKind k) {
    switch (k) {
        case TaskKind::Heat: return "heat";
        case TaskKind::Cool: return "cool";
        case TaskKind::Clean: return "clean";
        default: return "";
    }
}

std::string appliance_for(TaskKind k) {
    switch (k) {
        case TaskKind::Heat: return "microwave";
        case TaskKind::Cool: return "fridge";
        case TaskKind::Clean: return "sinkbasin";
        default: return "";
    }
}

// "cabinet (1-13), drawer (1)" over the places the object may hide.
std::string likely_places(const household::WorldSpec& spec) {
    std::vector<std::string> order;
    std::map<std::string, int> count;
    for (const auto& r : spec.receptacles) {
        auto type = household::entity_type(r.name);
        if (type == spec.task.target || r.appliance != household::ApplianceKind::None) continue;
        if (!count.count(type)) order.push_back(type);
        ++count[type];
    }
    std::vector<std::string> parts;
    for (const auto& t : order)
        parts.push_back(count[t] == 1 ? t + " (1)" : t + " (1-" + std::to_string(count[t]) + ")");
    return strings::join(parts, ", ");
}

std::vector<std::string> words(const std::string& action) {
    std::vector<std::string> out;
    for (auto w : strings::split_words(action)) out.emplace_back(w);
    return out;
}

std::string first_goto(const std::vector<std::string>& actions, std::size_t from) {
    for (std::size_t i = from; i < actions.size(); ++i)
        if (actions[i].rfind("go to ", 0) == 0) return actions[i].substr(6);
    return "";
}

std::string places_sentence(const household::WorldSpec& spec, const std::vector<std::string>& actions,
                            std::size_t from) {
    auto type = spec.task.object_type;
    std::string capital = article(type);
    capital[0] = static_cast<char>(std::toupper(capital[0]));
    return capital + " " + type + " is more likely to appear in " + likely_places(spec) +
           ". I can check one by one, starting with " + first_goto(actions, from) + ".";
}

std::string opening_thought(const household::WorldSpec& spec, const std::vector<std::string>& actions) {
    const auto& t = spec.task;
    auto obj = a(t.object_type);
    std::string plan;
    switch (t.kind) {
        case TaskKind::Put: plan = "find and take " + obj + ", then put it in " + t.target; break;
        case TaskKind::PutTwo:
            plan = "find and take the first " + t.object_type + ", then put it in " + t.target +
                   ", then find and take the second " + t.object_type + ", then put it in " + t.target;
            break;
        case TaskKind::Examine: plan = "find and take " + obj + ", then find and use a desklamp"; break;
        default:
            plan = "find and take " + obj + ", then " + treat_verb(t.kind) + " it with " + appliance_for(t.kind) +
                   ", then put it in " + t.target;
    }
    auto what = t.kind == TaskKind::PutTwo ? "the first " + t.object_type : obj;
    return "To solve the task, I need to " + plan + ". First I need to find " + what + ". " +
           places_sentence(spec, actions, 0);
}

std::string thought_for(const household::WorldSpec& spec, const std::vector<std::string>& actions, std::size_t i,
                        int& puts) {
    const auto& t = spec.task;
    if (i == 0) return opening_thought(spec, actions);
    auto cur = words(actions[i]);
    auto prev = words(actions[i - 1]);
    bool second = t.kind == TaskKind::PutTwo && puts == 1;
    if (cur[0] == "take") {
        auto obj = cur[1] + " " + cur[2];
        return "Now I find " + (second ? "the second " + t.object_type + " (" + cur[2] + ")" : a(numbered(obj))) +
               ". Next, I need to take it.";
    }
    if (cur[0] == "use") return "Now I find a desklamp (1). Next, I need to use it.";
    if (prev[0] == "take") {
        auto obj = a(numbered(prev[1] + " " + prev[2]));
        if (t.kind == TaskKind::Examine) return "Now I take " + obj + ". Next, I need to find a desklamp, starting with desklamp 1.";
        if (t.kind == TaskKind::Put || t.kind == TaskKind::PutTwo)
            return "Now I take " + obj + ". Next, I need to put it in/on " + t.target + ".";
        return "Now I take " + obj + ". Next, I need to go to " + a(appliance_for(t.kind) + " (1)") + " and " +
               treat_verb(t.kind) + " it.";
    }
    if (prev[0] == "heat" || prev[0] == "cool" || prev[0] == "clean")
        return "Now I " + prev[0] + " " + a(numbered(prev[1] + " " + prev[2])) +
               ". Next, I need to put it in/on " + t.target + ".";
    if (prev[0] == "put" && t.kind == TaskKind::PutTwo && puts == 1)
        return "Now I put the first " + t.object_type + " in " + t.target + ". Next, I need to find the second " +
               t.object_type + ". " + places_sentence(spec, actions, i);
    return "None";
}

// Visits `detours` places that hold no task object before handing over to the
// scripted solver, so the example shows a search.
std::vector<std::string> plan_actions(const household::WorldSpec& spec, int detours) {
    household::HouseholdEnv env(spec);
    std::vector<std::string> actions;
    for (const auto& r : spec.receptacles) {
        if (detours == 0) break;
        auto type = household::entity_type(r.name);
        if (type == spec.task.target || r.appliance != household::ApplianceKind::None) continue;
        bool holds = false;
        for (const auto& o : spec.objects)
            if (o.receptacle == r.name && household::entity_type(o.name) == spec.task.object_type) holds = true;
        if (holds) continue;
        actions.push_back("go to " + r.name);
        env.step(actions.back());
        if (r.openable) {
            actions.push_back("open " + r.name);
            env.step(actions.back());
        }
        --detours;
    }
    for (auto& a : env.oracle_rollout()) actions.push_back(a);
    return actions;
}

std::optional<Trace> build_example(const household::WorldSpec& spec, int detours) {
    auto actions = plan_actions(spec, detours);
    household::HouseholdEnv env(spec);
    if (actions.empty()) return std::nullopt;
    auto variant = full_variant(Dialect::Household);
    auto keys = state_keys(variant);
    auto goal = agent::extract_goal(env.initial_observation(), Dialect::Household);

    Trace trace;
    trace.initial = env.initial_observation();
    int puts = 0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        AgentContext ctx;
        ctx.goal = goal;
        ctx.state = env.ground_truth().project(keys).fields;
        auto thought = thought_for(spec, actions, i, puts);
        if (thought != "None") ctx.thought = thought;
        ctx.action = actions[i];
        auto outcome = env.step(actions[i]);
        if (!outcome.observation.accepted) return std::nullopt;
        if (words(actions[i])[0] == "put") ++puts;
        TraceStep step{ctx, std::nullopt};
        if (i + 1 < actions.size()) step.observation = outcome.observation;
        trace.steps.push_back(step);
        if (outcome.done && i + 1 < actions.size()) return std::nullopt;
    }
    if (!env.task_solved()) return std::nullopt;
    return trace;
}

bool fits(const Trace& t) {
    AgentVariant stateact = full_variant(Dialect::Household);
    AgentVariant react = stateact;
    react.include_goal = false;
    react.include_state = false;
    auto s = codec::word_count(codec::render_example(t, stateact));
    auto r = codec::word_count(codec::render_example(t, react));
    return s >= kStateActMin && s <= kStateActMax && r >= kReActMin && r <= kReActMax;
}

Trace craft_example(const textcraft::RecipeBook& book, const std::string& item) {
    textcraft::CraftTask task{"example-" + item, 0, {item, 1}, textcraft::recipe_depth(book, item)};
    textcraft::TextcraftEnv env(book, task);
    textcraft::Inventory scratch;
    auto actions = textcraft::solve(book, scratch, task.target);
    auto variant = full_variant(Dialect::Textcraft);
    auto goal = agent::extract_goal(env.initial_observation(), Dialect::Textcraft);

    std::vector<std::string> gets, crafts;
    for (const auto& a : actions) {
        auto cmd = textcraft::parse_command(a);
        auto what = std::to_string(cmd->target.count) + " " + cmd->target.item;
        (cmd->kind == textcraft::Command::Kind::Get ? gets : crafts).push_back(what);
    }
    std::string plan = "To solve the task, I need to get " + strings::join(gets, ", ") + ", then craft " +
                       strings::join(crafts, ", then ") + ". First I need to get " + gets.front() + ".";

    Trace trace;
    trace.initial = env.initial_observation();
    for (std::size_t i = 0; i < actions.size(); ++i) {
        AgentContext ctx;
        ctx.goal = goal;
        ctx.state = env.ground_truth().project(state_keys(variant)).fields;
        if (i == 0) ctx.thought = plan;
        else if (actions[i].rfind("craft", 0) == 0 && actions[i - 1].rfind("get", 0) == 0)
            ctx.thought = "Now I have the base items. Next, I need to craft the intermediate items in order.";
        ctx.action = actions[i];
        auto outcome = env.step(actions[i]);
        TraceStep step{ctx, std::nullopt};
        if (i + 1 < actions.size()) step.observation = outcome.observation;
        trace.steps.push_back(step);
    }
    return trace;
}

int textcraft_main(const fs::path& out_dir, const fs::path& recipes, const std::vector<std::string>& items) {
    auto book = textcraft::load_recipe_book(recipes);
    codec::PromptDocument doc;
    doc.dialect = Dialect::Textcraft;
    doc.has_preamble = doc.has_header = doc.has_trailer = doc.final_newline = true;
    for (const auto& item : items) doc.examples.push_back(craft_example(book, item));
    fs::create_directories(out_dir);
    auto path = out_dir / "craft.txt";
    std::ofstream(path) << codec::serialize_prompt_document(doc, full_variant(Dialect::Textcraft));
    std::cout << path.string() << "\n";
    return 0;
}

}  // namespace

// Word counts of every bundled few-shot example under the StateAct and
// ReAct-equivalent renderings.
int manifest_main(const fs::path& data) {
    auto entry = [&](const fs::path& file, Dialect dialect, const std::string& source) {
        auto set = codec::load_few_shot(file, dialect);
        auto s = full_variant(dialect);
        auto r = s;
        r.include_goal = r.include_state = false;
        nlohmann::ordered_json examples = nlohmann::ordered_json::array();
        for (const auto& ex : set.examples)
            examples.push_back({{"steps", ex.steps.size()},
                                {"words_stateact", codec::word_count(codec::render_example(ex, s))},
                                {"words_react", codec::word_count(codec::render_example(ex, r))}});
        return nlohmann::ordered_json{{"file", fs::relative(file, data).generic_string()},
                                      {"dialect", to_string(dialect)},
                                      {"source", source},
                                      {"examples", examples}};
    };
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (auto kind : household::kTaskKinds)
        files.push_back(entry(assets::household_few_shot_path(data, kind), Dialect::Household,
                              kind == TaskKind::Heat ? "transcribed" : "generated: make_fewshot <dir> " +
                                                                           std::string(household::to_string(kind))));
    files.push_back(entry(data / "fewshot/webshop/search.txt", Dialect::Webshop, "transcribed"));
    files.push_back(entry(data / "fewshot/textcraft/craft.txt", Dialect::Textcraft,
                          "generated: make_fewshot <dir> textcraft recipes.txt torch \"tripwire hook\""));
    nlohmann::ordered_json out{{"bounds",
                                {{"stateact", {kStateActMin, kStateActMax}}, {"react", {kReActMin, kReActMax}}}},
                               {"files", files}};
    auto path = data / "fewshot/manifest.json";
    std::ofstream(path) << out.dump(2) << "\n";
    std::cout << path.string() << "\n";
    return 0;
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fewshot <out_dir> [kind ...]\n";
        return 2;
    }
    fs::path out_dir = argv[1];
    if (argc == 3 && std::string(argv[2]) == "manifest") return manifest_main(out_dir);
    if (argc >= 4 && std::string(argv[2]) == "textcraft")
        return textcraft_main(out_dir, argv[3], std::vector<std::string>(argv + 4, argv + argc));
    std::vector<TaskKind> kinds;
    for (int i = 2; i < argc; ++i) kinds.push_back(household::parse_task_kind(argv[i]));
    if (kinds.empty())
        for (auto k : household::kTaskKinds)
            if (k != TaskKind::Heat) kinds.push_back(k);

    household::GenerationOptions big;
    big.min_receptacles = 22;
    big.max_receptacles = 30;
    big.min_distractors = 10;
    big.max_distractors = 16;

    fs::create_directories(out_dir);
    for (auto kind : kinds) {
        codec::PromptDocument doc;
        doc.dialect = Dialect::Household;
        doc.has_preamble = doc.has_header = doc.has_trailer = doc.final_newline = true;
        std::vector<std::uint64_t> used;
        for (std::uint64_t seed = 5000; doc.examples.size() < 2 && seed < 20000; ++seed) {
            auto spec = household::generate_world(seed, kind, big);
            for (int detours = 0; detours <= 6; ++detours) {
                auto trace = build_example(spec, detours);
                if (!trace || !fits(*trace)) continue;
                doc.examples.push_back(*trace);
                used.push_back(seed);
                break;
            }
        }
        if (doc.examples.size() < 2) {
            std::cerr << "no fitting examples for " << household::to_string(kind) << "\n";
            return 1;
        }
        auto path = out_dir / (std::string(household::to_string(kind)) + ".txt");
        std::ofstream(path) << codec::serialize_prompt_document(doc, full_variant(Dialect::Household));
        std::cout << path.string() << " seeds " << used[0] << ", " << used[1] << "\n";
    }
    return 0;
}

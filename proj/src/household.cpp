#include "chainstate/household.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::household {

namespace {

const std::regex kEntityName{R"(^[a-z]+ [1-9][0-9]*$)"};

struct NameKey {
    std::string type;
    int index = 0;
};

NameKey split_name(std::string_view name) {
    auto sp = name.rfind(' ');
    if (sp == std::string_view::npos) return {std::string(name), 0};
    return {std::string(name.substr(0, sp)), std::stoi(std::string(name.substr(sp + 1)))};
}

// Alfworld listing order: type ascending, then index descending.
bool listing_before(std::string_view a, std::string_view b) {
    auto ka = split_name(a);
    auto kb = split_name(b);
    if (ka.type != kb.type) return ka.type < kb.type;
    return ka.index > kb.index;
}

std::string listing(std::vector<std::string> names) {
    if (names.empty()) return "nothing";
    std::sort(names.begin(), names.end(), [](const auto& a, const auto& b) { return listing_before(a, b); });
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += (i + 1 == names.size()) ? ", and " : ", ";
        out += "a " + names[i];
    }
    return out;
}

std::string_view preposition(std::string_view target_type) {
    static const std::set<std::string, std::less<>> kInside{"cabinet",   "drawer", "fridge",   "garbagecan",
                                                            "microwave", "safe",   "sinkbasin"};
    return kInside.count(target_type) ? "in" : "on";
}

std::string article(std::string_view noun) {
    return (!noun.empty() && std::string_view("aeiou").find(noun.front()) != std::string_view::npos) ? "an" : "a";
}

bool is_clean(const World::Object& o) { return o.clean; }
bool is_hot(const World::Object& o) { return o.hot; }
bool is_cool(const World::Object& o) { return o.cool; }

using Property = bool (*)(const World::Object&);

Property property_for(Verb verb) {
    switch (verb) {
        case Verb::Clean: return is_clean;
        case Verb::Heat: return is_hot;
        case Verb::Cool: return is_cool;
        default: return nullptr;
    }
}

Verb verb_for(TaskKind kind) {
    switch (kind) {
        case TaskKind::Clean: return Verb::Clean;
        case TaskKind::Cool: return Verb::Cool;
        default: return Verb::Heat;
    }
}

std::string_view verb_word(Verb verb) {
    switch (verb) {
        case Verb::GoTo: return "go to";
        case Verb::Open: return "open";
        case Verb::Close: return "close";
        case Verb::Put: return "put";
        case Verb::Take: return "take";
        case Verb::Cool: return "cool";
        case Verb::Heat: return "heat";
        case Verb::Clean: return "clean";
        case Verb::Use: return "use";
    }
    return "";
}

bool appliance_fits(Verb verb, ApplianceKind kind) {
    switch (verb) {
        case Verb::Heat: return kind == ApplianceKind::Microwave || kind == ApplianceKind::StoveBurner;
        case Verb::Cool: return kind == ApplianceKind::Fridge;
        case Verb::Clean: return kind == ApplianceKind::SinkBasin;
        case Verb::Use: return kind == ApplianceKind::DeskLamp;
        default: return false;
    }
}

std::string strip_period(std::string s) {
    while (!s.empty() && s.back() == '.') s.pop_back();
    return std::string(strings::trim(s));
}

}  // namespace

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Clean: return "clean";
        case TaskKind::Heat: return "heat";
        case TaskKind::Cool: return "cool";
        case TaskKind::Examine: return "examine";
        case TaskKind::Put: return "put";
        case TaskKind::PutTwo: return "puttwo";
    }
    return "put";
}

TaskKind parse_task_kind(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    for (auto k : kTaskKinds)
        if (to_string(k) == t) return k;
    throw Error(ErrorKind::Validation, "unknown task kind '" + std::string(text) + "'");
}

std::string_view to_string(ApplianceKind kind) {
    switch (kind) {
        case ApplianceKind::None: return "none";
        case ApplianceKind::SinkBasin: return "sinkbasin";
        case ApplianceKind::Microwave: return "microwave";
        case ApplianceKind::StoveBurner: return "stoveburner";
        case ApplianceKind::Fridge: return "fridge";
        case ApplianceKind::DeskLamp: return "desklamp";
    }
    return "none";
}

ApplianceKind parse_appliance_kind(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    for (auto k : {ApplianceKind::None, ApplianceKind::SinkBasin, ApplianceKind::Microwave, ApplianceKind::StoveBurner,
                   ApplianceKind::Fridge, ApplianceKind::DeskLamp})
        if (to_string(k) == t) return k;
    throw Error(ErrorKind::Validation, "unknown appliance kind '" + std::string(text) + "'");
}

TaskKind kind_for_seed(std::uint64_t seed) {
    return kTaskKinds[(seed == 0 ? 0 : (seed - 1)) % kTaskKinds.size()];
}

std::string entity_type(std::string_view name) {
    return split_name(name).type;
}

void WorldSpec::validate() const {
    std::set<std::string> names;
    for (const auto& r : receptacles) {
        if (!std::regex_match(r.name, kEntityName))
            throw Error(ErrorKind::Validation, "malformed receptacle name '" + r.name + "'");
        if (!names.insert(r.name).second) throw Error(ErrorKind::Validation, "duplicate name '" + r.name + "'");
    }
    std::set<std::string> receptacle_names = names;
    for (const auto& o : objects) {
        if (!std::regex_match(o.name, kEntityName))
            throw Error(ErrorKind::Validation, "malformed object name '" + o.name + "'");
        if (!names.insert(o.name).second) throw Error(ErrorKind::Validation, "duplicate name '" + o.name + "'");
        if (!receptacle_names.count(o.receptacle))
            throw Error(ErrorKind::Validation, "object '" + o.name + "' placed in unknown receptacle '" +
                                                   o.receptacle + "'");
    }
    if (task.object_type.empty()) throw Error(ErrorKind::Validation, "task has no object type");
    if (task.kind != TaskKind::Examine && task.target.empty())
        throw Error(ErrorKind::Validation, "task has no target");
}

std::string task_sentence(const TaskSpec& task) {
    if (!task.description.empty()) {
        auto d = std::string(strings::trim(task.description));
        return d.back() == '.' ? d : d + ".";
    }
    const auto& o = task.object_type;
    const auto& t = task.target;
    auto prep = std::string(preposition(t));
    switch (task.kind) {
        case TaskKind::Clean: return "put a clean " + o + " " + prep + " " + t + ".";
        case TaskKind::Heat: return "put a hot " + o + " " + prep + " " + t + ".";
        case TaskKind::Cool: return "put a cool " + o + " " + prep + " " + t + ".";
        case TaskKind::Examine: return "look at " + o + " under the desklamp.";
        case TaskKind::Put: return "put some " + o + " " + prep + " " + t + ".";
        case TaskKind::PutTwo: return "put two " + o + " " + prep + " " + t + ".";
    }
    return "";
}

// ---------------------------------------------------------------------------
// generation

namespace {

struct ReceptacleType {
    const char* type;
    bool openable;
    ApplianceKind appliance;
};

constexpr ReceptacleType kReceptacleTypes[] = {
    {"armchair", false, ApplianceKind::None},     {"bed", false, ApplianceKind::None},
    {"cabinet", true, ApplianceKind::None},       {"coffeemachine", false, ApplianceKind::None},
    {"coffeetable", false, ApplianceKind::None},  {"countertop", false, ApplianceKind::None},
    {"desk", false, ApplianceKind::None},         {"desklamp", false, ApplianceKind::DeskLamp},
    {"diningtable", false, ApplianceKind::None},  {"drawer", true, ApplianceKind::None},
    {"dresser", false, ApplianceKind::None},      {"fridge", true, ApplianceKind::Fridge},
    {"garbagecan", false, ApplianceKind::None},   {"microwave", true, ApplianceKind::Microwave},
    {"safe", true, ApplianceKind::None},          {"shelf", false, ApplianceKind::None},
    {"sidetable", false, ApplianceKind::None},    {"sinkbasin", false, ApplianceKind::SinkBasin},
    {"sofa", false, ApplianceKind::None},         {"stoveburner", false, ApplianceKind::StoveBurner},
    {"toaster", false, ApplianceKind::None},
};

const ReceptacleType& receptacle_type(std::string_view type) {
    for (const auto& t : kReceptacleTypes)
        if (type == t.type) return t;
    throw Error(ErrorKind::Validation, "unknown receptacle type '" + std::string(type) + "'");
}

// Types drawn to pad a room; appliances appear only when a task needs them
// or by chance from this list.
const std::vector<std::string> kFillerTypes{"cabinet",   "cabinet", "drawer",     "drawer",      "countertop",
                                            "shelf",     "safe",    "sidetable",  "diningtable", "coffeetable",
                                            "desk",      "dresser", "garbagecan", "armchair",    "sofa",
                                            "bed",       "toaster", "coffeemachine", "stoveburner", "microwave",
                                            "fridge",    "sinkbasin"};

const std::vector<std::string> kAllObjects{"alarmclock", "apple",   "book",     "bowl",   "bread",      "candle",
                                           "cd",         "cellphone", "cloth",  "creditcard", "cup",    "egg",
                                           "fork",       "keychain", "knife",   "lettuce", "mug",       "newspaper",
                                           "pan",        "pen",     "pencil",   "pillow",  "plate",     "pot",
                                           "potato",     "remotecontrol", "soapbar", "spatula", "spoon", "statue",
                                           "tomato",     "vase",    "watch"};

struct KindPools {
    std::vector<std::string> objects;
    std::vector<std::string> targets;
    std::string appliance;   // receptacle type the task needs besides the target
};

KindPools pools_for(TaskKind kind) {
    switch (kind) {
        case TaskKind::Heat:
            return {{"apple", "bread", "cup", "egg", "mug", "plate", "potato", "tomato"},
                    {"cabinet", "countertop", "diningtable", "fridge", "garbagecan", "shelf"},
                    "microwave"};
        case TaskKind::Cool:
            return {{"apple", "bowl", "bread", "cup", "lettuce", "mug", "pan", "plate", "pot", "potato", "tomato"},
                    {"cabinet", "countertop", "diningtable", "garbagecan", "microwave", "shelf"},
                    "fridge"};
        case TaskKind::Clean:
            return {{"apple", "bowl", "cloth", "cup", "fork", "knife", "lettuce", "mug", "pan", "plate", "pot",
                     "soapbar", "spatula", "spoon", "tomato"},
                    {"cabinet", "countertop", "diningtable", "drawer", "fridge", "garbagecan", "shelf"},
                    "sinkbasin"};
        case TaskKind::Examine:
            return {{"alarmclock", "book", "bowl", "cd", "cellphone", "creditcard", "keychain", "mug", "pen",
                     "pencil", "pillow", "statue", "vase", "watch"},
                    {"desklamp"},
                    ""};
        case TaskKind::Put:
        case TaskKind::PutTwo:
            return {{"alarmclock", "apple", "book", "bowl", "candle", "cd", "cellphone", "cloth", "creditcard",
                     "cup", "keychain", "knife", "mug", "pen", "pencil", "pillow", "plate", "remotecontrol",
                     "soapbar", "spoon", "statue", "vase", "watch"},
                    {"armchair", "bed", "cabinet", "coffeetable", "countertop", "desk", "diningtable", "drawer",
                     "dresser", "garbagecan", "safe", "shelf", "sidetable", "sofa"},
                    ""};
    }
    return {};
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& pool) {
    return pool[rng() % pool.size()];
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

WorldSpec generate_world(std::uint64_t seed, TaskKind kind, const GenerationOptions& options) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind) + 1);
    auto pools = pools_for(kind);

    WorldSpec spec;
    spec.seed = seed;
    {
        std::ostringstream id;
        id << "household-" << to_string(kind) << "-";
        id.width(3);
        id.fill('0');
        id << seed;
        spec.id = id.str();
    }
    spec.task.kind = kind;
    spec.task.object_type = pick(rng, pools.objects);
    spec.task.target = pick(rng, pools.targets);

    std::map<std::string, int> counts;
    auto add_receptacle = [&](const std::string& type) {
        const auto& rt = receptacle_type(type);
        spec.receptacles.push_back({type + " " + std::to_string(++counts[type]), rt.openable, rt.appliance});
    };

    int n = uniform(rng, options.min_receptacles, options.max_receptacles);
    if (kind != TaskKind::Examine) add_receptacle(spec.task.target);
    if (!pools.appliance.empty() && pools.appliance != spec.task.target) add_receptacle(pools.appliance);
    // Somewhere to keep things apart from the target, appliance and lamp.
    add_receptacle(pick(rng, std::vector<std::string>{"cabinet", "countertop", "drawer", "shelf", "sidetable"}));
    while (static_cast<int>(spec.receptacles.size()) < n) {
        auto type = pick(rng, kFillerTypes);
        if (type == "desklamp") continue;
        add_receptacle(type);
    }

    std::vector<std::string> hiding;
    std::vector<std::string> anywhere;
    for (const auto& r : spec.receptacles) {
        auto type = entity_type(r.name);
        if (r.appliance == ApplianceKind::DeskLamp) continue;
        anywhere.push_back(r.name);
        if (type == spec.task.target || r.appliance != ApplianceKind::None) continue;
        hiding.push_back(r.name);
    }

    std::map<std::string, int> object_counts;
    auto add_object = [&](const std::string& type, const std::string& where) {
        spec.objects.push_back({type + " " + std::to_string(++object_counts[type]), where, false, false, false});
    };
    int copies = kind == TaskKind::PutTwo ? uniform(rng, 2, 3) : 1;
    for (int i = 0; i < copies; ++i) add_object(spec.task.object_type, pick(rng, hiding));
    int distractors = uniform(rng, options.min_distractors, options.max_distractors);
    for (int i = 0; i < distractors; ++i) {
        auto type = pick(rng, kAllObjects);
        if (type == spec.task.object_type) continue;
        add_object(type, pick(rng, anywhere));
    }

    // The desk lamp sits on its own; appended last so the draws above stay
    // independent of the task kind.
    if (kind == TaskKind::Examine) {
        spec.receptacles.push_back({"desklamp 1", false, ApplianceKind::DeskLamp});
        spec.task.target = "desklamp";
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// serialization

nlohmann::json to_json(const WorldSpec& spec) {
    nlohmann::ordered_json j;
    j["id"] = spec.id;
    j["seed"] = spec.seed;
    j["task"] = {{"kind", to_string(spec.task.kind)},
                 {"object_type", spec.task.object_type},
                 {"target", spec.task.target}};
    if (!spec.task.description.empty()) j["task"]["description"] = spec.task.description;
    auto rs = nlohmann::ordered_json::array();
    for (const auto& r : spec.receptacles) {
        nlohmann::ordered_json e{{"name", r.name}, {"openable", r.openable}};
        if (r.appliance != ApplianceKind::None) e["appliance"] = to_string(r.appliance);
        rs.push_back(e);
    }
    j["receptacles"] = rs;
    auto os = nlohmann::ordered_json::array();
    for (const auto& o : spec.objects) {
        nlohmann::ordered_json e{{"name", o.name}, {"receptacle", o.receptacle}};
        if (o.clean) e["clean"] = true;
        if (o.hot) e["hot"] = true;
        if (o.cool) e["cool"] = true;
        os.push_back(e);
    }
    j["objects"] = os;
    return nlohmann::json::parse(j.dump());
}

WorldSpec world_from_json(const nlohmann::json& j) {
    WorldSpec spec;
    try {
        spec.id = j.at("id").get<std::string>();
        spec.seed = j.value("seed", std::uint64_t{0});
        const auto& t = j.at("task");
        spec.task.kind = parse_task_kind(t.at("kind").get<std::string>());
        spec.task.object_type = t.at("object_type").get<std::string>();
        spec.task.target = t.value("target", std::string());
        spec.task.description = t.value("description", std::string());
        for (const auto& r : j.at("receptacles")) {
            ReceptacleSpec rs;
            rs.name = r.at("name").get<std::string>();
            rs.openable = r.value("openable", false);
            rs.appliance = parse_appliance_kind(r.value("appliance", std::string("none")));
            spec.receptacles.push_back(rs);
        }
        for (const auto& o : j.at("objects")) {
            ObjectSpec os;
            os.name = o.at("name").get<std::string>();
            os.receptacle = o.at("receptacle").get<std::string>();
            os.clean = o.value("clean", false);
            os.hot = o.value("hot", false);
            os.cool = o.value("cool", false);
            spec.objects.push_back(os);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("world document: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string dump_world(const WorldSpec& spec) {
    // Re-ordered through ordered_json so files keep id/seed/task first.
    nlohmann::ordered_json j;
    auto plain = to_json(spec);
    for (const char* key : {"id", "seed", "task", "receptacles", "objects"}) j[key] = plain[key];
    return j.dump(2) + "\n";
}

WorldSpec parse_world(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Validation, std::string("world document: ") + e.what());
    }
    return world_from_json(j);
}

WorldSpec load_world(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_world(ss.str());
}

void save_world(const std::filesystem::path& path, const WorldSpec& spec) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << dump_world(spec);
}

// ---------------------------------------------------------------------------
// actions

std::string HouseholdAction::canonical(bool move_to_syntax) const {
    const auto& a = operands.at(0);
    switch (verb) {
        case Verb::GoTo:
        case Verb::Open:
        case Verb::Close:
        case Verb::Use: return std::string(verb_word(verb)) + " " + a;
        case Verb::Take: return "take " + a + " from " + operands.at(1);
        case Verb::Put:
            return move_to_syntax ? "move " + a + " to " + operands.at(1) : "put " + a + " in/on " + operands.at(1);
        case Verb::Cool:
        case Verb::Heat:
        case Verb::Clean: return std::string(verb_word(verb)) + " " + a + " with " + operands.at(1);
    }
    return a;
}

std::optional<HouseholdAction> try_normalize_action(std::string_view text, ActionSyntax syntax) {
    static const std::string E = "([a-z]+ [1-9][0-9]*)";
    static const std::regex kUnary{"^(go to|open|close|use) " + E + "$"};
    static const std::regex kTake{"^take " + E + " from " + E + "$"};
    static const std::regex kPut{"^put " + E + " (?:in/on|in|on|into|onto) " + E + "$"};
    static const std::regex kMove{"^move " + E + " to " + E + "$"};
    static const std::regex kApply{"^(heat|cool|clean) " + E + " with " + E + "$"};

    auto s = strip_period(strings::normalize_ws(text));
    std::smatch m;
    if (std::regex_match(s, m, kUnary)) {
        static const std::map<std::string, Verb> kVerbs{
            {"go to", Verb::GoTo}, {"open", Verb::Open}, {"close", Verb::Close}, {"use", Verb::Use}};
        return HouseholdAction{kVerbs.at(m[1]), {m[2]}};
    }
    if (std::regex_match(s, m, kTake)) return HouseholdAction{Verb::Take, {m[1], m[2]}};
    if (std::regex_match(s, m, kPut)) return HouseholdAction{Verb::Put, {m[1], m[2]}};
    if (syntax.move_to_syntax && std::regex_match(s, m, kMove)) return HouseholdAction{Verb::Put, {m[1], m[2]}};
    if (std::regex_match(s, m, kApply)) {
        Verb v = m[1] == "heat" ? Verb::Heat : m[1] == "cool" ? Verb::Cool : Verb::Clean;
        return HouseholdAction{v, {m[2], m[3]}};
    }
    return std::nullopt;
}

HouseholdAction normalize_action(std::string_view text, ActionSyntax syntax) {
    auto a = try_normalize_action(text, syntax);
    if (!a) throw Error(ErrorKind::UnrecognizedAction, "'" + std::string(text) + "'");
    return *a;
}

// ---------------------------------------------------------------------------
// World

World::World(const WorldSpec& spec, ActionSyntax syntax) : syntax_(syntax) {
    for (const auto& r : spec.receptacles) receptacles_.push_back({r, false});
    for (const auto& o : spec.objects)
        objects_.push_back({o.name, entity_type(o.name), o.receptacle, o.clean, o.hot, o.cool});
}

const World::Object* World::object(std::string_view name) const {
    for (const auto& o : objects_)
        if (o.name == name) return &o;
    return nullptr;
}

const World::Receptacle* World::receptacle(std::string_view name) const {
    for (const auto& r : receptacles_)
        if (r.spec.name == name) return &r;
    return nullptr;
}

World::Object* World::mutable_object(std::string_view name) {
    return const_cast<Object*>(object(name));
}

World::Receptacle* World::mutable_receptacle(std::string_view name) {
    return const_cast<Receptacle*>(receptacle(name));
}

const World::Object* World::held() const {
    return inventory_ ? object(*inventory_) : nullptr;
}

std::vector<const World::Object*> World::contents(std::string_view receptacle) const {
    std::vector<const Object*> out;
    for (const auto& o : objects_)
        if (o.place == receptacle) out.push_back(&o);
    return out;
}

std::string World::room_listing() const {
    std::vector<std::string> names;
    for (const auto& r : receptacles_) names.push_back(r.spec.name);
    return listing(std::move(names));
}

namespace {

std::string contents_listing(const World& w, std::string_view receptacle) {
    std::vector<std::string> names;
    for (const auto* o : w.contents(receptacle)) names.push_back(o->name);
    return listing(std::move(names));
}

}  // namespace

std::string World::describe_arrival(const Receptacle& r) const {
    const auto& n = r.spec.name;
    if (!r.spec.openable) return "On the " + n + ", you see " + contents_listing(*this, n) + ".";
    if (!r.open) return "The " + n + " is closed.";
    return "The " + n + " is open. In it, you see " + contents_listing(*this, n) + ".";
}

int World::count_in(std::string_view type, std::string_view target_type, bool (*property)(const Object&)) const {
    int n = 0;
    for (const auto& o : objects_) {
        if (o.type != type || o.place.empty()) continue;
        if (entity_type(o.place) != target_type) continue;
        if (property && !property(o)) continue;
        ++n;
    }
    return n;
}

World::Applied World::apply(std::string_view action_text) {
    Applied rejected{std::string(kRejected), false, std::nullopt};
    auto action = try_normalize_action(action_text, syntax_);
    if (!action) return rejected;
    const auto& ops = action->operands;
    auto at = [&](const std::string& name) { return location_ && *location_ == name; };

    switch (action->verb) {
        case Verb::GoTo: {
            auto* r = mutable_receptacle(ops[0]);
            if (!r) return rejected;
            location_ = r->spec.name;
            visited_.push_back(r->spec.name);
            return {describe_arrival(*r), true, action};
        }
        case Verb::Open: {
            auto* r = mutable_receptacle(ops[0]);
            if (!r || !at(r->spec.name) || !r->spec.openable || r->open) return rejected;
            r->open = true;
            return {"You open the " + r->spec.name + ". The " + r->spec.name + " is open. In it, you see " +
                        contents_listing(*this, r->spec.name) + ".",
                    true, action};
        }
        case Verb::Close: {
            auto* r = mutable_receptacle(ops[0]);
            if (!r || !at(r->spec.name) || !r->spec.openable || !r->open) return rejected;
            r->open = false;
            return {"You close the " + r->spec.name + ".", true, action};
        }
        case Verb::Take: {
            auto* o = mutable_object(ops[0]);
            const auto* r = receptacle(ops[1]);
            if (!o || !r || inventory_ || !at(r->spec.name) || !accessible(*r) || o->place != r->spec.name)
                return rejected;
            o->place.clear();
            inventory_ = o->name;
            return {"You pick up the " + o->name + " from the " + r->spec.name + ".", true, action};
        }
        case Verb::Put: {
            auto* o = mutable_object(ops[0]);
            const auto* r = receptacle(ops[1]);
            if (!o || !r || !inventory_ || *inventory_ != o->name || !at(r->spec.name) || !accessible(*r) ||
                r->spec.appliance == ApplianceKind::DeskLamp)
                return rejected;
            o->place = r->spec.name;
            inventory_.reset();
            if (syntax_.move_to_syntax) return {"You move the " + o->name + " to the " + r->spec.name + ".", true, action};
            return {"You put the " + o->name + " in/on the " + r->spec.name + ".", true, action};
        }
        case Verb::Heat:
        case Verb::Cool:
        case Verb::Clean: {
            auto* o = mutable_object(ops[0]);
            const auto* r = receptacle(ops[1]);
            if (!o || !r || !inventory_ || *inventory_ != o->name || !at(r->spec.name) ||
                !appliance_fits(action->verb, r->spec.appliance))
                return rejected;
            if (action->verb == Verb::Heat) {
                o->hot = true;
                o->cool = false;
            } else if (action->verb == Verb::Cool) {
                o->cool = true;
                o->hot = false;
            } else {
                o->clean = true;
            }
            return {"You " + std::string(verb_word(action->verb)) + " the " + o->name + " using the " + r->spec.name +
                        ".",
                    true, action};
        }
        case Verb::Use: {
            const auto* r = receptacle(ops[0]);
            if (!r || !at(r->spec.name) || r->spec.appliance != ApplianceKind::DeskLamp) return rejected;
            ++lamp_uses_;
            if (const auto* h = held()) examined_types_.insert(h->type);
            for (const auto* o : contents(r->spec.name)) examined_types_.insert(o->type);
            return {"You turn on the " + r->spec.name + ".", true, action};
        }
    }
    return rejected;
}

// ---------------------------------------------------------------------------
// HouseholdEnv

namespace {

std::string opening_text(const World& w, const std::string& task) {
    return "You are in the middle of a room. Looking quickly around you, you see " + w.room_listing() +
           ".\nYour task is to: " + task;
}

const World::Receptacle* first_receptacle(const World& w, bool (*pred)(const World::Receptacle&, const void*),
                                          const void* arg) {
    const World::Receptacle* best = nullptr;
    for (const auto& r : w.receptacles()) {
        if (!pred(r, arg)) continue;
        if (!best) {
            best = &r;
            continue;
        }
        auto a = split_name(r.spec.name);
        auto b = split_name(best->spec.name);
        if (a.type < b.type || (a.type == b.type && a.index < b.index)) best = &r;
    }
    return best;
}

const World::Receptacle* first_of_type(const World& w, const std::string& type) {
    return first_receptacle(
        w, [](const World::Receptacle& r, const void* t) { return entity_type(r.spec.name) == *static_cast<const std::string*>(t); },
        &type);
}

const World::Receptacle* first_appliance(const World& w, Verb verb) {
    // Microwaves before stove burners for heating.
    if (verb == Verb::Heat) {
        if (auto* r = first_receptacle(
                w, [](const World::Receptacle& r, const void*) { return r.spec.appliance == ApplianceKind::Microwave; },
                nullptr))
            return r;
    }
    return first_receptacle(
        w, [](const World::Receptacle& r, const void* v) { return appliance_fits(*static_cast<const Verb*>(v), r.spec.appliance); },
        &verb);
}

// Visit `r` and make its inside reachable; nullopt once standing at an
// accessible `r`.
std::optional<std::string> approach(const World& w, const World::Receptacle& r) {
    if (!w.location() || *w.location() != r.spec.name) return "go to " + r.spec.name;
    if (!w.accessible(r)) return "open " + r.spec.name;
    return std::nullopt;
}

struct Planner {
    const World& w;
    bool move_syntax;

    std::string put(const World::Object& o, const World::Receptacle& r) const {
        return HouseholdAction{Verb::Put, {o.name, r.spec.name}}.canonical(move_syntax);
    }

    // Put down whatever is held, preferring the current spot.
    std::optional<std::string> drop() const {
        const auto* h = w.held();
        if (!h) return std::nullopt;
        if (w.location()) {
            const auto* here = w.receptacle(*w.location());
            if (here && here->spec.appliance != ApplianceKind::DeskLamp) {
                if (!w.accessible(*here)) return "open " + here->spec.name;
                return put(*h, *here);
            }
        }
        auto* spot = first_receptacle(
            w, [](const World::Receptacle& r, const void*) { return !r.spec.openable && r.spec.appliance == ApplianceKind::None; },
            nullptr);
        if (!spot) spot = first_receptacle(
            w, [](const World::Receptacle& r, const void*) { return r.spec.appliance != ApplianceKind::DeskLamp; }, nullptr);
        if (!spot) return std::nullopt;
        if (auto a = approach(w, *spot)) return a;
        return put(*h, *spot);
    }

    // Step towards holding an object of `type`; nullopt once holding one.
    std::optional<std::string> acquire(const std::string& type, const std::string& avoid_target,
                                       Property prefer) const {
        if (const auto* h = w.held()) {
            if (h->type == type) return std::nullopt;
            return drop();
        }
        const World::Object* best = nullptr;
        for (const auto& o : w.objects()) {
            if (o.type != type || o.place.empty()) continue;
            if (!avoid_target.empty() && entity_type(o.place) == avoid_target) continue;
            if (!best) {
                best = &o;
                continue;
            }
            bool a = prefer && prefer(o);
            bool b = prefer && prefer(*best);
            if (a && !b) best = &o;
        }
        if (!best) return "look";
        const auto* r = w.receptacle(best->place);
        if (auto a = approach(w, *r)) return a;
        return "take " + best->name + " from " + r->spec.name;
    }

    std::optional<std::string> treat(const std::string& type, Verb verb, const std::string& avoid_target) const {
        auto prop = property_for(verb);
        if (auto a = acquire(type, avoid_target, prop)) return a;
        const auto* h = w.held();
        if (prop(*h)) return std::nullopt;
        const auto* app = first_appliance(w, verb);
        if (!app) return "look";
        if (!w.location() || *w.location() != app->spec.name) return "go to " + app->spec.name;
        return std::string(verb_word(verb)) + " " + h->name + " with " + app->spec.name;
    }

    std::string deliver(const std::string& type, const std::string& target, std::optional<Verb> verb) const {
        std::optional<std::string> a =
            verb ? treat(type, *verb, target) : acquire(type, target, nullptr);
        if (a) return *a;
        const auto* dest = first_of_type(w, target);
        if (!dest) return "look";
        if (auto step = approach(w, *dest)) return *step;
        return put(*w.held(), *dest);
    }

    std::string examine(const std::string& type) const {
        if (auto a = acquire(type, "", nullptr)) return *a;
        const auto* lamp = first_receptacle(
            w, [](const World::Receptacle& r, const void*) { return r.spec.appliance == ApplianceKind::DeskLamp; },
            nullptr);
        if (!lamp) return "look";
        if (!w.location() || *w.location() != lamp->spec.name) return "go to " + lamp->spec.name;
        return "use " + lamp->spec.name;
    }
};

const std::regex kHoldGoal{R"(^(?:find and )?(?:take|pick up) (?:a|an|some|the|the first|the second|another) ([a-z]+)$)"};
const std::regex kApplyGoal{R"(^(heat|cool|clean) (?:a|an|some|the|the first|the second) ([a-z]+)(?: with (?:the )?[a-z]+(?: [0-9]+)?)?$)"};
const std::regex kPutGoal{R"(^put (?:a|an|some|the|the first|the second) ([a-z]+) (?:in/on|in|on|into|onto) (?:the )?([a-z]+)(?: [0-9]+)?$)"};
const std::regex kExamineGoal{R"(^(?:examine|look at) (?:a|an|some|the) ([a-z]+) (?:with|under) the desklamp$)"};

}  // namespace

HouseholdEnv::HouseholdEnv(WorldSpec spec, EnvOptions options)
    : spec_(std::move(spec)), options_(options), world_(spec_, ActionSyntax{options_.move_to_syntax}) {
    spec_.validate();
    goal_.kind = Goal::Kind::Main;
    goal_.text = task_sentence(spec_.task);
    initial_ = {0, opening_text(world_, goal_.text), true};
    done_ = satisfied(world_, goal_, false);
}

StepOutcome HouseholdEnv::step(std::string_view action_text) {
    if (done_) throw Error(ErrorKind::EpisodeFinished, "step after the task was solved in " + spec_.id);
    auto applied = world_.apply(action_text);
    ++steps_;
    if (goal_.kind == Goal::Kind::Primitive && applied.accepted && applied.action &&
        applied.action->canonical(options_.move_to_syntax) == goal_.primitive)
        primitive_done_ = true;
    done_ = satisfied(world_, goal_, primitive_done_);
    return {{steps_, applied.text, applied.accepted}, done_, done_};
}

std::string HouseholdEnv::normalize(std::string_view action_text) const {
    auto a = try_normalize_action(action_text, ActionSyntax{options_.move_to_syntax});
    if (!a) return std::string(strings::trim(action_text));
    return a->canonical(options_.move_to_syntax);
}

GoldState HouseholdEnv::ground_truth() const {
    GoldState g;
    g.fields.set("current location", world_.location() ? *world_.location() : "starting location");
    g.fields.set("current inventory", world_.held() ? world_.held()->name : "None");
    g.fields.set("locations visited", world_.visited().empty() ? "None" : strings::join(world_.visited(), ", "));
    return g;
}

GoldState HouseholdEnv::gold_update(const GoldState& prev, std::string_view action, const Observation& obs) const {
    GoldState next = prev;
    if (!obs.accepted) return next;
    auto a = try_normalize_action(action, ActionSyntax{true});
    if (!a) return next;
    switch (a->verb) {
        case Verb::GoTo: {
            next.fields.set("current location", a->operands[0]);
            auto visited = prev.get("locations visited");
            next.fields.set("locations visited", visited == "None" ? a->operands[0] : visited + ", " + a->operands[0]);
            break;
        }
        case Verb::Take: next.fields.set("current inventory", a->operands[0]); break;
        case Verb::Put: next.fields.set("current inventory", "None"); break;
        default: break;
    }
    return next;
}

bool HouseholdEnv::satisfied(const World& w, const Goal& g, bool primitive_done) const {
    const auto* h = w.held();
    switch (g.kind) {
        case Goal::Kind::Main: {
            const auto& t = spec_.task;
            switch (t.kind) {
                case TaskKind::Put: return w.count_in(t.object_type, t.target) >= 1;
                case TaskKind::PutTwo: return w.count_in(t.object_type, t.target) >= 2;
                case TaskKind::Examine: return w.examined_types().count(t.object_type) > 0;
                default: return w.count_in(t.object_type, t.target, property_for(verb_for(t.kind))) >= 1;
            }
        }
        case Goal::Kind::Primitive: return primitive_done;
        case Goal::Kind::Hold: return h && h->type == g.object_type;
        case Goal::Kind::Apply: return h && h->type == g.object_type && property_for(g.verb)(*h);
        case Goal::Kind::PutInto: return w.count_in(g.object_type, g.target_type) > g.baseline;
        case Goal::Kind::Examine: return w.lamp_uses() > g.baseline && w.examined_types().count(g.object_type) > 0;
    }
    return false;
}

std::optional<std::string> HouseholdEnv::next_action(const World& w, const Goal& g) const {
    Planner p{w, options_.move_to_syntax};
    switch (g.kind) {
        case Goal::Kind::Main: {
            const auto& t = spec_.task;
            switch (t.kind) {
                case TaskKind::Put:
                case TaskKind::PutTwo: return p.deliver(t.object_type, t.target, std::nullopt);
                case TaskKind::Examine: return p.examine(t.object_type);
                default: return p.deliver(t.object_type, t.target, verb_for(t.kind));
            }
        }
        case Goal::Kind::Primitive: return g.primitive;
        case Goal::Kind::Hold: return p.acquire(g.object_type, "", nullptr);
        case Goal::Kind::Apply: return p.treat(g.object_type, g.verb, "");
        case Goal::Kind::PutInto: return p.deliver(g.object_type, g.target_type, std::nullopt);
        case Goal::Kind::Examine: return p.examine(g.object_type);
    }
    return std::nullopt;
}

std::string HouseholdEnv::oracle_action() const {
    auto a = next_action(world_, goal_);
    return a ? *a : "look";
}

std::vector<std::string> HouseholdEnv::oracle_rollout(int limit) const {
    std::vector<std::string> out;
    World w = world_;
    bool prim = primitive_done_;
    while (!satisfied(w, goal_, prim) && static_cast<int>(out.size()) < limit) {
        auto a = next_action(w, goal_);
        if (!a) break;
        auto applied = w.apply(*a);
        out.push_back(*a);
        if (goal_.kind == Goal::Kind::Primitive && applied.accepted && applied.action &&
            applied.action->canonical(options_.move_to_syntax) == goal_.primitive)
            prim = true;
        if (!applied.accepted) break;
    }
    return out;
}

std::vector<std::string> HouseholdEnv::oracle_plan() const {
    if (goal_.kind != Goal::Kind::Main) return oracle_rollout();
    const auto& t = spec_.task;
    const auto& x = t.object_type;
    auto a = article(x);
    auto into = std::string(preposition(t.target)) + " " + t.target;
    switch (t.kind) {
        case TaskKind::Put: return {"find and take " + a + " " + x, "put the " + x + " " + into};
        case TaskKind::PutTwo:
            return {"find and take the first " + x, "put the first " + x + " " + into,
                    "find and take the second " + x, "put the second " + x + " " + into};
        case TaskKind::Examine: return {"find and take " + a + " " + x, "examine the " + x + " with the desklamp"};
        default: {
            auto verb = std::string(verb_word(verb_for(t.kind)));
            return {"find and take " + a + " " + x, verb + " the " + x, "put the " + x + " " + into};
        }
    }
}

std::optional<Observation> HouseholdEnv::begin_subtask(std::string_view task) {
    auto text = strip_period(strings::normalize_ws(task));
    Goal g;
    g.text = text;
    std::smatch m;
    if (text == strip_period(strings::normalize_ws(task_sentence(spec_.task)))) {
        g.kind = Goal::Kind::Main;
    } else if (auto prim = try_normalize_action(text, ActionSyntax{options_.move_to_syntax})) {
        g.kind = Goal::Kind::Primitive;
        g.primitive = prim->canonical(options_.move_to_syntax);
    } else if (std::regex_match(text, m, kHoldGoal)) {
        g.kind = Goal::Kind::Hold;
        g.object_type = m[1];
    } else if (std::regex_match(text, m, kApplyGoal)) {
        g.kind = Goal::Kind::Apply;
        g.verb = m[1] == "heat" ? Verb::Heat : m[1] == "cool" ? Verb::Cool : Verb::Clean;
        g.object_type = m[2];
    } else if (std::regex_match(text, m, kPutGoal)) {
        g.kind = Goal::Kind::PutInto;
        g.object_type = m[1];
        g.target_type = m[2];
        g.baseline = world_.count_in(g.object_type, g.target_type);
    } else if (std::regex_match(text, m, kExamineGoal)) {
        g.kind = Goal::Kind::Examine;
        g.object_type = m[1];
        g.baseline = world_.lamp_uses();
    } else {
        return std::nullopt;
    }

    goal_ = g;
    primitive_done_ = false;
    steps_ = 0;
    done_ = satisfied(world_, goal_, false);
    std::string where = world_.location() ? "You are at the " + *world_.location() + "." : "You are in the middle of a room.";
    std::string holding = world_.held() ? " You are carrying the " + world_.held()->name + "." : "";
    initial_ = {0,
                where + " Looking quickly around you, you see " + world_.room_listing() + "." + holding +
                    "\nYour task is to: " + g.text + ".",
                true};
    return initial_;
}

bool HouseholdEnv::task_solved() const {
    return satisfied(world_, goal_, primitive_done_);
}

}  // namespace chainstate::household

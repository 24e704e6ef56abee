#include "chainstate/textcraft.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::textcraft {

namespace {

std::string clean_line(std::string_view text) {
    auto s = strings::normalize_ws(text);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return std::string(strings::trim(s));
}

std::optional<ItemCount> parse_item_count(std::string_view text) {
    static const std::regex kItem{R"(^(\d+) ([a-z][a-z ]*[a-z]|[a-z])$)"};
    std::string s(strings::trim(text));
    std::smatch m;
    if (!std::regex_match(s, m, kItem)) return std::nullopt;
    int n = 0;
    try {
        n = std::stoi(m[1]);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (n <= 0) return std::nullopt;
    return ItemCount{m[2], n};
}

std::string render(const ItemCount& ic) {
    return std::to_string(ic.count) + " " + ic.item;
}

Inventory parse_inventory_text(std::string_view text) {
    Inventory inv;
    auto t = strings::trim(text);
    if (t.empty() || strings::iequals(t, "None")) return inv;
    for (auto part : strings::split(t, ",")) {
        if (auto ic = parse_item_count(strings::normalize_ws(part))) inv[ic->item] += ic->count;
    }
    return inv;
}

std::string inventory_listing(const Inventory& inv) {
    std::vector<std::string> parts;
    for (const auto& [item, n] : inv)
        if (n > 0) parts.push_back("[" + item + "] (" + std::to_string(n) + ")");
    if (parts.empty()) return "Your inventory is empty.";
    return "Inventory: " + strings::join(parts, ", ");
}

// Recipe whose output is `item` and whose inputs are an integer multiple of
// the command's; returns the multiple.
std::optional<std::pair<const Recipe*, int>> match_recipe(const RecipeBook& book, const Command& cmd) {
    for (const auto* r : book.recipes_for(cmd.target.item)) {
        if (cmd.target.count % r->output.count != 0) continue;
        int k = cmd.target.count / r->output.count;
        if (cmd.inputs.size() != r->inputs.size()) continue;
        bool ok = true;
        for (const auto& need : r->inputs) {
            auto it = std::find_if(cmd.inputs.begin(), cmd.inputs.end(),
                                   [&](const ItemCount& c) { return c.item == need.item; });
            if (it == cmd.inputs.end() || it->count != need.count * k) {
                ok = false;
                break;
            }
        }
        if (ok) return std::make_pair(r, k);
    }
    return std::nullopt;
}

const Recipe* shallowest_recipe(const RecipeBook& book, const std::map<std::string, int>& depths,
                                std::string_view item) {
    const Recipe* best = nullptr;
    int best_depth = 0;
    for (const auto* r : book.recipes_for(item)) {
        int d = 0;
        bool known = true;
        for (const auto& in : r->inputs) {
            auto it = depths.find(in.item);
            if (it == depths.end()) {
                known = false;
                break;
            }
            d = std::max(d, it->second);
        }
        if (!known) continue;
        if (!best || d < best_depth) {
            best = r;
            best_depth = d;
        }
    }
    return best;
}

}  // namespace

std::string Recipe::text() const {
    std::vector<std::string> parts;
    for (const auto& in : inputs) parts.push_back(render(in));
    return "craft " + render(output) + " using " + strings::join(parts, ", ");
}

RecipeBook::RecipeBook(std::vector<Recipe> recipes, std::set<std::string> base_items)
    : recipes_(std::move(recipes)), base_(std::move(base_items)) {}

std::vector<const Recipe*> RecipeBook::recipes_for(std::string_view item) const {
    std::vector<const Recipe*> out;
    for (const auto& r : recipes_)
        if (r.output.item == item) out.push_back(&r);
    return out;
}

bool RecipeBook::knows(std::string_view item) const {
    return is_base(item) || !recipes_for(item).empty();
}

std::vector<std::string> RecipeBook::items() const {
    std::set<std::string> all = base_;
    for (const auto& r : recipes_) all.insert(r.output.item);
    return {all.begin(), all.end()};
}

void RecipeBook::validate() const {
    for (const auto& r : recipes_) {
        if (r.inputs.empty()) throw Error(ErrorKind::Validation, "recipe for '" + r.output.item + "' has no inputs");
        if (r.output.count <= 0) throw Error(ErrorKind::Validation, "non-positive count in: " + r.text());
        for (const auto& in : r.inputs) {
            if (in.count <= 0) throw Error(ErrorKind::Validation, "non-positive count in: " + r.text());
            if (in.item == r.output.item) throw Error(ErrorKind::Validation, "self-input in: " + r.text());
            if (!knows(in.item))
                throw Error(ErrorKind::Validation, "input '" + in.item + "' is neither base nor craftable");
        }
    }
    // Cycle check over the item graph.
    std::map<std::string, int> mark;
    std::function<void(const std::string&)> visit = [&](const std::string& item) {
        auto& m = mark[item];
        if (m == 2) return;
        if (m == 1) throw Error(ErrorKind::Validation, "recipe cycle through '" + item + "'");
        m = 1;
        for (const auto* r : recipes_for(item))
            for (const auto& in : r->inputs) visit(in.item);
        mark[item] = 2;
    };
    for (const auto& item : items()) visit(item);
}

std::optional<Command> parse_command(std::string_view text) {
    static const std::regex kGet{R"(^get (.+)$)"};
    static const std::regex kCraft{R"(^craft (.+?) using (.+)$)"};
    auto s = clean_line(text);
    if (s == "inventory") return Command{Command::Kind::Inventory, {}, {}};
    std::smatch m;
    if (std::regex_match(s, m, kCraft)) {
        auto target = parse_item_count(m[1].str());
        if (!target) return std::nullopt;
        Command cmd{Command::Kind::Craft, *target, {}};
        auto inputs = m[2].str();
        for (auto part : strings::split(inputs, ",")) {
            auto in = parse_item_count(strings::trim(part));
            if (!in) return std::nullopt;
            cmd.inputs.push_back(*in);
        }
        return cmd;
    }
    if (std::regex_match(s, m, kGet)) {
        auto target = parse_item_count(m[1].str());
        if (!target) return std::nullopt;
        return Command{Command::Kind::Get, *target, {}};
    }
    return std::nullopt;
}

RecipeBook parse_recipe_book(std::string_view text) {
    std::vector<Recipe> recipes;
    std::set<std::string> base;
    int line_no = 0;
    for (auto raw : strings::split(text, "\n")) {
        ++line_no;
        auto line = strings::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (strings::istarts_with(line, "base ")) {
            base.insert(strings::normalize_ws(line.substr(5)));
            continue;
        }
        auto cmd = parse_command(line);
        if (!cmd || cmd->kind != Command::Kind::Craft)
            throw Error(ErrorKind::Validation, "recipe line " + std::to_string(line_no) + ": '" + std::string(line) + "'");
        recipes.push_back({cmd->target, cmd->inputs});
    }
    RecipeBook book(std::move(recipes), std::move(base));
    book.validate();
    return book;
}

RecipeBook load_recipe_book(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_recipe_book(ss.str());
}

std::string dump_recipe_book(const RecipeBook& book) {
    std::string out;
    for (const auto& b : book.base_items()) out += "base " + b + "\n";
    for (const auto& r : book.recipes()) out += r.text() + "\n";
    return out;
}

std::map<std::string, int> recipe_depths(const RecipeBook& book) {
    std::map<std::string, int> depth;
    for (const auto& b : book.base_items()) depth[b] = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& r : book.recipes()) {
            if (book.is_base(r.output.item)) continue;
            int d = 0;
            bool ready = true;
            for (const auto& in : r.inputs) {
                auto it = depth.find(in.item);
                if (it == depth.end()) {
                    ready = false;
                    break;
                }
                d = std::max(d, it->second);
            }
            if (!ready) continue;
            auto it = depth.find(r.output.item);
            if (it == depth.end() || d + 1 < it->second) {
                depth[r.output.item] = d + 1;
                changed = true;
            }
        }
    }
    return depth;
}

int recipe_depth(const RecipeBook& book, std::string_view item) {
    auto depths = recipe_depths(book);
    auto it = depths.find(std::string(item));
    if (it == depths.end()) throw Error(ErrorKind::UnknownItem, "'" + std::string(item) + "'");
    return it->second;
}

CraftTask generate_task(const RecipeBook& book, int depth, std::uint64_t seed) {
    std::vector<std::string> pool;
    for (const auto& [item, d] : recipe_depths(book))
        if (d == depth) pool.push_back(item);
    if (pool.empty()) throw Error(ErrorKind::NoItemAtDepth, "no item at depth " + std::to_string(depth));
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(depth));
    CraftTask task;
    task.seed = seed;
    task.depth = depth;
    task.target.item = pool[rng() % pool.size()];
    task.target.count = 1 + static_cast<int>(rng() % 2);
    std::ostringstream id;
    id << "textcraft-d" << depth << "-";
    id.width(3);
    id.fill('0');
    id << seed;
    task.id = id.str();
    return task;
}

std::vector<CraftTask> bundled_tasks(const RecipeBook& book) {
    std::vector<CraftTask> out;
    for (int depth : {2, 3, 4})
        for (std::uint64_t seed = 0; seed < 10; ++seed) out.push_back(generate_task(book, depth, seed));
    return out;
}

std::vector<CraftTask> load_tasks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<CraftTask> out;
    try {
        auto j = nlohmann::json::parse(in);
        for (const auto& t : j) {
            CraftTask task;
            task.id = t.at("id").get<std::string>();
            task.seed = t.value("seed", std::uint64_t{0});
            task.target.item = t.at("item").get<std::string>();
            task.target.count = t.value("count", 1);
            task.depth = t.value("depth", 0);
            out.push_back(task);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Validation, path.string() + ": " + e.what());
    }
    return out;
}

void save_tasks(const std::filesystem::path& path, const std::vector<CraftTask>& tasks) {
    auto j = nlohmann::ordered_json::array();
    for (const auto& t : tasks)
        j.push_back({{"id", t.id}, {"seed", t.seed}, {"item", t.target.item}, {"count", t.target.count}, {"depth", t.depth}});
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::string render_inventory(const Inventory& inv) {
    std::vector<std::string> parts;
    for (const auto& [item, n] : inv)
        if (n > 0) parts.push_back(std::to_string(n) + " " + item);
    return parts.empty() ? "None" : strings::join(parts, ", ");
}

std::vector<std::string> solve(const RecipeBook& book, Inventory& inv, const ItemCount& want) {
    auto depths = recipe_depths(book);
    if (!depths.count(want.item)) throw Error(ErrorKind::UnknownItem, "'" + want.item + "'");

    // Aggregate demand, processed deepest first so every item is produced
    // by a single command.
    std::vector<std::string> order;
    for (const auto& [item, d] : depths) order.push_back(item);
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return depths[a] > depths[b]; });

    std::map<std::string, int> need{{want.item, want.count}};
    std::map<std::string, std::string> command;
    for (const auto& item : order) {
        int net = need[item] - (inv.count(item) ? inv.at(item) : 0);
        if (net <= 0) continue;
        if (book.is_base(item)) {
            command[item] = "get " + std::to_string(net) + " " + item;
            continue;
        }
        const auto* r = shallowest_recipe(book, depths, item);
        int k = (net + r->output.count - 1) / r->output.count;
        Command c{Command::Kind::Craft, {item, r->output.count * k}, {}};
        for (const auto& in : r->inputs) {
            need[in.item] += in.count * k;
            c.inputs.push_back({in.item, in.count * k});
        }
        std::vector<std::string> parts;
        for (const auto& in : c.inputs) parts.push_back(render(in));
        command[item] = "craft " + render(c.target) + " using " + strings::join(parts, ", ");
    }

    // Emit in post-order from the target so inputs precede their uses.
    std::vector<std::string> out;
    std::set<std::string> emitted;
    std::function<void(const std::string&)> emit = [&](const std::string& item) {
        if (emitted.count(item) || !command.count(item)) return;
        emitted.insert(item);
        if (!book.is_base(item)) {
            const auto* r = shallowest_recipe(book, depths, item);
            for (const auto& in : r->inputs) emit(in.item);
        }
        out.push_back(command[item]);
    };
    emit(want.item);

    for (const auto& line : out) {
        auto c = parse_command(line);
        if (c->kind == Command::Kind::Craft)
            for (const auto& in : c->inputs) inv[in.item] -= in.count;
        inv[c->target.item] += c->target.count;
    }
    return out;
}

// ---------------------------------------------------------------------------
// TextcraftEnv

TextcraftEnv::TextcraftEnv(RecipeBook book, CraftTask task, EnvOptions options)
    : book_(std::move(book)), task_(std::move(task)), options_(options) {
    if (!book_.knows(task_.target.item)) throw Error(ErrorKind::UnknownItem, "'" + task_.target.item + "'");
    goal_.text = "craft " + render(task_.target);
    goal_.want = task_.target;
    initial_ = {0, opening(goal_.text, false), true};
}

std::string TextcraftEnv::opening(const std::string& goal_text, bool with_inventory) const {
    std::vector<std::string> lines;
    std::set<std::string> seen;
    std::function<void(const std::string&)> visit = [&](const std::string& item) {
        if (!seen.insert(item).second) return;
        for (const auto* r : book_.recipes_for(item)) {
            for (const auto& in : r->inputs) visit(in.item);
            lines.push_back(r->text());
        }
    };
    visit(goal_.want.item);
    std::string out;
    if (!lines.empty()) out += "Crafting commands:\n" + strings::join(lines, "\n") + "\n";
    if (with_inventory && render_inventory(inventory_) != "None") out += inventory_listing(inventory_) + "\n";
    return out + "Goal: " + goal_text + ".";
}

StepOutcome TextcraftEnv::step(std::string_view action_text) {
    if (done_) throw Error(ErrorKind::EpisodeFinished, "step after the task was solved in " + task_.id);
    ++steps_;
    auto finish = [&](std::string text, bool accepted) {
        auto it = inventory_.find(goal_.want.item);
        done_ = it != inventory_.end() && it->second >= goal_.want.count;
        return StepOutcome{{steps_, std::move(text), accepted}, done_, done_};
    };

    auto cmd = parse_command(action_text);
    if (!cmd) return finish("Could not find a valid command.", false);
    switch (cmd->kind) {
        case Command::Kind::Inventory: return finish(inventory_listing(inventory_), true);
        case Command::Kind::Get:
            if (!book_.is_base(cmd->target.item)) return finish("Could not find " + cmd->target.item, false);
            inventory_[cmd->target.item] += cmd->target.count;
            return finish("Got " + render(cmd->target), true);
        case Command::Kind::Craft: {
            auto match = match_recipe(book_, *cmd);
            if (!match) return finish("Could not find a valid recipe for " + render(cmd->target), false);
            for (const auto& in : cmd->inputs) {
                auto it = inventory_.find(in.item);
                if (it == inventory_.end() || it->second < in.count)
                    return finish("Could not find enough items to craft " + render(cmd->target), false);
            }
            for (const auto& in : cmd->inputs) {
                if ((inventory_[in.item] -= in.count) == 0) inventory_.erase(in.item);
            }
            inventory_[cmd->target.item] += cmd->target.count;
            return finish("Crafted " + render(cmd->target), true);
        }
    }
    return finish("Could not find a valid command.", false);
}

std::string TextcraftEnv::normalize(std::string_view action_text) const {
    auto cmd = parse_command(action_text);
    if (!cmd) return std::string(strings::trim(action_text));
    switch (cmd->kind) {
        case Command::Kind::Inventory: return "inventory";
        case Command::Kind::Get: return "get " + render(cmd->target);
        case Command::Kind::Craft: return Recipe{cmd->target, cmd->inputs}.text();
    }
    return std::string(strings::trim(action_text));
}

GoldState TextcraftEnv::ground_truth() const {
    GoldState g;
    g.fields.set("current inventory", render_inventory(inventory_));
    return g;
}

GoldState TextcraftEnv::gold_update(const GoldState& prev, std::string_view action, const Observation& obs) const {
    if (!obs.accepted) return prev;
    auto cmd = parse_command(action);
    if (!cmd || cmd->kind == Command::Kind::Inventory) return prev;
    auto inv = parse_inventory_text(prev.get("current inventory"));
    if (cmd->kind == Command::Kind::Craft)
        for (const auto& in : cmd->inputs) inv[in.item] -= in.count;
    inv[cmd->target.item] += cmd->target.count;
    GoldState next = prev;
    next.fields.set("current inventory", render_inventory(inv));
    return next;
}

std::string TextcraftEnv::oracle_action() const {
    auto inv = inventory_;
    auto plan = solve(book_, inv, goal_.want);
    return plan.empty() ? "inventory" : plan.front();
}

std::vector<std::string> TextcraftEnv::oracle_plan() const {
    auto inv = inventory_;
    return solve(book_, inv, goal_.want);
}

std::optional<Observation> TextcraftEnv::begin_subtask(std::string_view task) {
    static const std::regex kGoal{R"(^(?:get|craft|obtain|make|fetch) (\d+|a|an|some) ([a-z][a-z ]*?)(?: using .+)?$)"};
    auto text = clean_line(task);
    std::smatch m;
    if (!std::regex_match(text, m, kGoal)) return std::nullopt;
    std::string item = m[2];
    if (!book_.knows(item)) return std::nullopt;
    int n = std::isdigit(static_cast<unsigned char>(m[1].str()[0])) ? std::stoi(m[1]) : 1;
    if (n <= 0) return std::nullopt;

    auto have = inventory_.count(item) ? inventory_.at(item) : 0;
    goal_.text = text;
    goal_.want = {item, have + n};
    steps_ = 0;
    done_ = false;
    initial_ = {0, opening(goal_.text, true), true};
    return initial_;
}

bool TextcraftEnv::task_solved() const {
    auto it = inventory_.find(goal_.want.item);
    return it != inventory_.end() && it->second >= goal_.want.count;
}

}  // namespace chainstate::textcraft

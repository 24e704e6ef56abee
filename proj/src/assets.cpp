#include "chainstate/assets.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chainstate/error.hpp"

namespace chainstate::assets {

namespace fs = std::filesystem;

fs::path default_data_dir() {
    if (const char* env = std::getenv("CHAINSTATE_DATA_DIR"); env && *env) return env;
    return CHAINSTATE_DATA_DIR;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path household_few_shot_path(const fs::path& data, household::TaskKind kind) {
    return data / "fewshot" / "household" / (std::string(household::to_string(kind)) + ".txt");
}

codec::FewShotSet household_few_shot(const fs::path& data, household::TaskKind kind) {
    return codec::load_few_shot(household_few_shot_path(data, kind), Dialect::Household,
                                std::string(household::to_string(kind)));
}

codec::FewShotSet textcraft_few_shot(const fs::path& data) {
    return codec::load_few_shot(data / "fewshot" / "textcraft" / "craft.txt", Dialect::Textcraft, "craft");
}

std::vector<household::WorldSpec> bundled_worlds(const fs::path& data) {
    auto dir = data / "worlds" / "household";
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "missing world directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<household::WorldSpec> out;
    for (const auto& f : files) out.push_back(household::load_world(f));
    return out;
}

textcraft::RecipeBook bundled_recipe_book(const fs::path& data) {
    return textcraft::load_recipe_book(data / "textcraft" / "recipes.txt");
}

std::vector<textcraft::CraftTask> bundled_textcraft_tasks(const fs::path& data) {
    return textcraft::load_tasks(data / "textcraft" / "tasks.json");
}

adapt::PlannerPrompt planner_prompt(const fs::path& data, Dialect dialect) {
    return adapt::load_planner_prompt(data / "planner" / (std::string(to_string(dialect)) + ".txt"));
}

}  // namespace chainstate::assets

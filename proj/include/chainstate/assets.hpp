#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chainstate/adapt.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/household.hpp"
#include "chainstate/textcraft.hpp"

namespace chainstate::assets {

/// $CHAINSTATE_DATA_DIR when set, else the source tree's data/ directory.
std::filesystem::path default_data_dir();

std::filesystem::path household_few_shot_path(const std::filesystem::path& data, household::TaskKind kind);
codec::FewShotSet household_few_shot(const std::filesystem::path& data, household::TaskKind kind);
codec::FewShotSet textcraft_few_shot(const std::filesystem::path& data);

/// data/worlds/household/*.json, sorted by file name.
std::vector<household::WorldSpec> bundled_worlds(const std::filesystem::path& data);

textcraft::RecipeBook bundled_recipe_book(const std::filesystem::path& data);
std::vector<textcraft::CraftTask> bundled_textcraft_tasks(const std::filesystem::path& data);

adapt::PlannerPrompt planner_prompt(const std::filesystem::path& data, Dialect dialect);

std::string read_text(const std::filesystem::path& path);

}  // namespace chainstate::assets

#include "chainstate/environment.hpp"

namespace chainstate {

GoldState GoldState::project(const std::vector<std::string>& keys) const {
    GoldState out;
    for (const auto& k : keys) out.fields.set(k, get(k));
    return out;
}

}  // namespace chainstate

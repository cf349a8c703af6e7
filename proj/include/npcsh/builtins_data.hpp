#pragma once

#include <string>
#include <utility>
#include <vector>

namespace npcsh::detail {

// (name, YAML source) pairs for every packaged Jinx, baked in at build time.
const std::vector<std::pair<std::string, std::string>>& builtin_sources();

} // namespace npcsh::detail

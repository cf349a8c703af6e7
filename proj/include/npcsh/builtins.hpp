#pragma once

#include <map>
#include <string>

#include "npcsh/cat_model.hpp"

namespace npcsh {

// Engine ids a step may name directly. Everything else in an `engine` field
// must resolve to a Jinx.
bool is_builtin_engine(const std::string& engine);

// The Jinx catalog every team sees behind its own definitions: sh, python,
// chat, web_search, screenshot, react, delegate, computer_use. Parsed once
// from the definitions embedded at build time.
const std::map<std::string, JinxDef>& builtin_catalog();

const JinxDef* find_builtin_jinx(const std::string& name);

} // namespace npcsh

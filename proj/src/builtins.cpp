#include "npcsh/builtins.hpp"

#include <set>

#include "npcsh/builtins_data.hpp"

namespace npcsh {

bool is_builtin_engine(const std::string& id) {
    static const std::set<std::string> ids = {"sh", "bash", "python", "llm", "static", "agent"};
    return ids.count(id) > 0;
}

const std::map<std::string, JinxDef>& builtin_catalog() {
    static const std::map<std::string, JinxDef> catalog = [] {
        std::map<std::string, JinxDef> out;
        for (const auto& [name, source] : detail::builtin_sources()) {
            JinxDef jinx = parse_jinx(source, "<builtin:" + name + ">");
            out.emplace(jinx.name, std::move(jinx));
        }
        return out;
    }();
    return catalog;
}

const JinxDef* find_builtin_jinx(const std::string& name) {
    const auto& catalog = builtin_catalog();
    auto it = catalog.find(name);
    return it == catalog.end() ? nullptr : &it->second;
}

} // namespace npcsh

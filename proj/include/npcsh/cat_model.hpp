#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "npcsh/value.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Domain types for the declarative data layer: Jinx tool templates, NPC agent
// definitions, and the context files that scope teams.
// ---------------------------------------------------------------------------

struct InputDecl {
    std::string name;
    TypeTag type = TypeTag::String;
    bool required = true;
    std::optional<Value> default_value;
    std::string description;

    bool operator==(const InputDecl&) const = default;
};

struct StepDef {
    std::string name;
    std::string engine;
    std::string body;                          // on-disk key: `code`
    std::map<std::string, std::string> args;   // template-valued, used for Jinx engines

    bool operator==(const StepDef&) const = default;
};

struct JinxDef {
    std::string name;
    std::string description;
    std::vector<InputDecl> inputs;
    std::vector<StepDef> steps;
    std::filesystem::path source_path;

    const InputDecl* find_input(const std::string& input_name) const;

    // Equality ignores provenance.
    bool operator==(const JinxDef& other) const {
        return name == other.name && description == other.description &&
               inputs == other.inputs && steps == other.steps;
    }
};

struct NpcDef {
    std::string name;
    std::string directive;                     // on-disk key: `primary_directive`
    std::string model;
    std::string provider;
    std::vector<std::string> jinx_list;        // catalog order == file order
    std::filesystem::path source_path;

    bool operator==(const NpcDef& other) const {
        return name == other.name && directive == other.directive && model == other.model &&
               provider == other.provider && jinx_list == other.jinx_list;
    }
};

struct ContextDef {
    std::string orchestrator;
    std::string description;
    std::map<std::string, std::string> env;
    std::string default_model;                 // on-disk key: `model`
    std::string default_provider;              // on-disk key: `provider`

    bool operator==(const ContextDef&) const = default;
};

// A team directory loaded into memory. Immutable after load_team returns;
// sub-teams hold a non-owning pointer to their parent for outward name
// resolution, so a Team is pinned in place (no copies, no moves).
class Team {
public:
    Team() = default;
    Team(const Team&) = delete;
    Team& operator=(const Team&) = delete;

    std::filesystem::path path;
    ContextDef context;
    std::map<std::string, NpcDef> npcs;
    std::map<std::string, JinxDef> jinx_catalog;
    std::map<std::string, std::unique_ptr<Team>> sub_teams;
    const Team* parent = nullptr;
    std::vector<std::string> warnings;

    std::string name() const { return path.filename().string(); }
    const NpcDef* find_npc(const std::string& npc_name) const;

    // Depth-first search for an NPC anywhere in this team or its sub-teams;
    // returns the owning team as well so callers can resolve in its scope.
    struct NpcLocation {
        const NpcDef* npc = nullptr;
        const Team* team = nullptr;
    };
    NpcLocation find_npc_recursive(const std::string& npc_name) const;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// Parses one Jinx document. Unknown keys are hard errors at every level.
JinxDef parse_jinx(const std::string& source, const std::filesystem::path& origin = {});
NpcDef parse_npc(const std::string& source, const std::filesystem::path& origin = {});
ContextDef parse_context(const std::string& source, const std::filesystem::path& origin = {});

// Structural re-validation of a definition built programmatically (the parse
// functions already enforce this for file input).
void validate_jinx_def(const JinxDef& jinx);

// Serializers; parse(to_yaml(x)) is structurally equal to x.
std::string to_yaml(const JinxDef& jinx);
std::string to_yaml(const NpcDef& npc);
std::string to_yaml(const ContextDef& ctx);

// ---------------------------------------------------------------------------
// Team loading and resolution
// ---------------------------------------------------------------------------

// Loads a team directory tree: exactly one .ctx file per team directory,
// .npc files beside it, a jinxes/ subdirectory flattened recursively by
// declared name, and every subdirectory containing a .ctx file as a sub-team.
std::unique_ptr<Team> load_team(const std::filesystem::path& dir);

// Nearest-scope-wins lookup: this team's catalog, then ancestors outward,
// then the built-in catalog. Returns nullptr when the name is unknown.
const JinxDef* try_resolve_jinx(const std::string& name, const Team& scope);

// Same lookup; throws Error{UnknownJinx} when the name is found nowhere.
const JinxDef& resolve_jinx(const std::string& name, const Team& scope);

struct Diagnostic {
    std::string code;      // e.g. "UnresolvedJinxRef", "CycleDetected"
    std::string subject;   // the npc/jinx/team the finding is about
    std::string message;
};

// Static health check over a loaded team; empty result means runnable.
std::vector<Diagnostic> validate_team(const Team& team);

} // namespace npcsh

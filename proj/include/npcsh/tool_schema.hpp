#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npcsh/cat_model.hpp"
#include "npcsh/value.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Schemas and catalogs
// ---------------------------------------------------------------------------

struct ParamSpec {
    std::string name;
    TypeTag type = TypeTag::String;
    bool required = true;
    std::string description;

    bool operator==(const ParamSpec&) const = default;
};

// The machine-facing face of a Jinx: inputs and description only. Step
// contents never cross this boundary.
struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;

    bool operator==(const ToolSchema&) const = default;
};

// An NPC's tool surface: exactly its Jinx list, in order. The catalog keeps
// its own JinxDef copies so enforcement answers from catalog membership
// alone — nothing outside this struct can authorize a call.
struct Catalog {
    std::string owner;
    std::vector<ToolSchema> tools;
    std::vector<JinxDef> defs;  // parallel to tools

    const JinxDef* find(const std::string& tool_name) const;
    std::vector<std::string> names() const;
};

struct ToolCall {
    std::string tool;
    Bindings arguments;
    std::string raw;  // the model text this was parsed from

    bool operator==(const ToolCall& other) const {
        return tool == other.tool && arguments == other.arguments;
    }
};

ToolSchema derive_schema(const JinxDef& jinx);

// Catalog over `npc.jinx_list` resolved in `scope`; throws UnknownJinx when
// an entry does not resolve.
Catalog build_catalog(const NpcDef& npc, const Team& scope);

// Catalog over explicit definitions (synthetic catalogs, tests).
Catalog build_catalog(const std::string& owner, const std::vector<JinxDef>& defs);

// ---------------------------------------------------------------------------
// Parsing model output
// ---------------------------------------------------------------------------

enum class CallMode { native, prompted };

struct ParsedCall {
    enum class Kind { none, call, malformed };
    Kind kind = Kind::none;
    std::optional<ToolCall> call;       // set iff kind == call
    std::string error;                  // set iff kind == malformed
    std::vector<std::string> warnings;  // e.g. extra blocks ignored
};

// Prompted mode scans for a fenced block opened by a line ```tool_call and
// closed by ```, holding one JSON object {"tool": <name>, "arguments": {..}}.
// The first block is honored; later blocks are ignored with a warning. A
// block that opens but does not parse (or never closes) is malformed —
// distinct from "no call", because it triggers corrective feedback. Native
// mode parses a provider tool-call payload directly.
ParsedCall parse_tool_call(const std::string& model_output, CallMode mode);

// ---------------------------------------------------------------------------
// Enforcement
// ---------------------------------------------------------------------------

struct AuthorizedCall {
    const JinxDef* jinx = nullptr;  // borrowed from the catalog
    Bindings arguments;             // coerced to the declared type tags
};

// The structural gate: the call's tool must be a catalog member, every
// required parameter must be present, and every argument must match (or
// losslessly coerce to) its declared type tag. Throws UnknownTool,
// MissingRequiredArgument, ArgumentTypeError.
AuthorizedCall enforce(const ToolCall& call, const Catalog& catalog);

// ---------------------------------------------------------------------------
// Prompted-mode wire rendering
// ---------------------------------------------------------------------------

// System-prompt fragment documenting the catalog and the invocation grammar.
// The catalog is embedded as JSON inside a ```tools fence so that
// parse_tools_prompt can recover it bit-for-bit.
std::string render_tools_prompt(const Catalog& catalog);

// Recovers the schemas embedded by render_tools_prompt (equivalence checks).
std::vector<ToolSchema> parse_tools_prompt(const std::string& prompt);

// JSON forms shared with the gateway.
Value schema_to_json(const ToolSchema& schema);
ToolSchema schema_from_json(const Value& json);
Value schemas_to_openai_tools(const std::vector<ToolSchema>& schemas);

} // namespace npcsh

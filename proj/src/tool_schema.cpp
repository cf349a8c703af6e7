#include "npcsh/tool_schema.hpp"

#include <algorithm>

#include "npcsh/error.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Schemas and catalogs
// ---------------------------------------------------------------------------

const JinxDef* Catalog::find(const std::string& tool_name) const {
    for (const auto& def : defs) {
        if (def.name == tool_name) return &def;
    }
    return nullptr;
}

std::vector<std::string> Catalog::names() const {
    std::vector<std::string> out;
    out.reserve(tools.size());
    for (const auto& tool : tools) out.push_back(tool.name);
    return out;
}

ToolSchema derive_schema(const JinxDef& jinx) {
    ToolSchema schema;
    schema.name = jinx.name;
    schema.description = jinx.description;
    for (const auto& input : jinx.inputs) {
        schema.parameters.push_back(
            {input.name, input.type, input.required, input.description});
    }
    return schema;
}

Catalog build_catalog(const NpcDef& npc, const Team& scope) {
    Catalog catalog;
    catalog.owner = npc.name;
    for (const auto& name : npc.jinx_list) {
        const JinxDef& jinx = resolve_jinx(name, scope);
        catalog.tools.push_back(derive_schema(jinx));
        catalog.defs.push_back(jinx);
    }
    return catalog;
}

Catalog build_catalog(const std::string& owner, const std::vector<JinxDef>& defs) {
    Catalog catalog;
    catalog.owner = owner;
    for (const auto& jinx : defs) {
        catalog.tools.push_back(derive_schema(jinx));
        catalog.defs.push_back(jinx);
    }
    return catalog;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCallFence = "```tool_call";
constexpr const char* kToolsFence = "```tools";

std::string rstrip(const std::string& s) {
    size_t end = s.find_last_not_of(" \t\r");
    return end == std::string::npos ? "" : s.substr(0, end + 1);
}

// Splits into lines without the terminators; a trailing newline does not
// produce an extra empty line.
std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

struct FencedBlock {
    std::string content;
    bool closed = false;
};

// Collects every block fenced by `opener`; an unterminated final block is
// returned with closed=false.
std::vector<FencedBlock> fenced_blocks(const std::string& text, const std::string& opener) {
    std::vector<FencedBlock> blocks;
    std::vector<std::string> lines = split_lines(text);
    size_t i = 0;
    while (i < lines.size()) {
        if (rstrip(lines[i]) != opener) {
            ++i;
            continue;
        }
        FencedBlock block;
        ++i;
        while (i < lines.size()) {
            if (rstrip(lines[i]) == "```") {
                block.closed = true;
                ++i;
                break;
            }
            block.content += lines[i] + "\n";
            ++i;
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

ParsedCall malformed(std::string message) {
    ParsedCall out;
    out.kind = ParsedCall::Kind::malformed;
    out.error = std::move(message);
    return out;
}

ParsedCall call_from_object(const Value& object, const std::string& raw) {
    if (!object.is_object()) return malformed("tool_call payload is not an object");
    if (!object.contains("tool") || !object["tool"].is_string()) {
        return malformed("tool_call payload lacks a string 'tool' key");
    }
    ToolCall call;
    call.tool = object["tool"].get<std::string>();
    call.raw = raw;
    if (object.contains("arguments") && !object["arguments"].is_null()) {
        if (!object["arguments"].is_object()) {
            return malformed("'arguments' must be an object");
        }
        for (const auto& [key, value] : object["arguments"].items()) {
            call.arguments[key] = value;
        }
    }
    ParsedCall out;
    out.kind = ParsedCall::Kind::call;
    out.call = std::move(call);
    return out;
}

ParsedCall parse_native(const std::string& payload_text) {
    Value payload = Value::parse(payload_text, nullptr, false);
    if (payload.is_discarded()) return malformed("native payload is not valid JSON");
    // OpenAI shape: {"function": {"name": ..., "arguments": "<json text>"}}.
    if (payload.is_object() && payload.contains("function")) {
        const Value& fn = payload["function"];
        if (!fn.is_object() || !fn.contains("name") || !fn["name"].is_string()) {
            return malformed("native payload lacks function.name");
        }
        Value object = Value::object();
        object["tool"] = fn["name"];
        Value arguments = Value::object();
        if (fn.contains("arguments")) {
            if (fn["arguments"].is_string()) {
                arguments = Value::parse(fn["arguments"].get<std::string>(), nullptr, false);
                if (arguments.is_discarded()) {
                    return malformed("function.arguments is not valid JSON");
                }
            } else {
                arguments = fn["arguments"];
            }
        }
        object["arguments"] = arguments;
        return call_from_object(object, payload_text);
    }
    return call_from_object(payload, payload_text);
}

} // namespace

ParsedCall parse_tool_call(const std::string& model_output, CallMode mode) {
    if (mode == CallMode::native) return parse_native(model_output);

    std::vector<FencedBlock> blocks = fenced_blocks(model_output, kCallFence);
    if (blocks.empty()) return {};

    const FencedBlock& first = blocks.front();
    if (!first.closed) return malformed("tool_call block never closes (truncated output?)");

    Value object = Value::parse(first.content, nullptr, false);
    if (object.is_discarded()) {
        return malformed("tool_call block is not valid JSON: " + rstrip(first.content));
    }
    ParsedCall out = call_from_object(object, first.content);
    if (out.kind == ParsedCall::Kind::call && blocks.size() > 1) {
        out.warnings.push_back("ignoring " + std::to_string(blocks.size() - 1) +
                               " additional tool_call block(s); one call per turn");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Enforcement
// ---------------------------------------------------------------------------

AuthorizedCall enforce(const ToolCall& call, const Catalog& catalog) {
    const JinxDef* jinx = catalog.find(call.tool);
    if (!jinx) {
        throw Error(ErrorKind::UnknownTool,
                    "'" + call.tool + "' is not in " + catalog.owner + "'s tool catalog");
    }

    AuthorizedCall authorized;
    authorized.jinx = jinx;

    for (const auto& [key, value] : call.arguments) {
        const InputDecl* input = jinx->find_input(key);
        if (!input) {
            throw Error(ErrorKind::ArgumentTypeError,
                        "'" + call.tool + "' has no parameter '" + key + "'");
        }
        if (value_matches(input->type, value)) {
            authorized.arguments[key] = value;
        } else if (auto coerced = coerce_value(input->type, value)) {
            authorized.arguments[key] = *coerced;
        } else {
            throw Error(ErrorKind::ArgumentTypeError,
                        "parameter '" + key + "' of '" + call.tool + "' expects " +
                            to_string(input->type) + ", got " + value.dump());
        }
    }

    for (const auto& input : jinx->inputs) {
        if (input.required && !authorized.arguments.count(input.name) &&
            !input.default_value) {
            throw Error(ErrorKind::MissingRequiredArgument,
                        "'" + call.tool + "' requires parameter '" + input.name + "'");
        }
    }
    return authorized;
}

// ---------------------------------------------------------------------------
// Wire rendering
// ---------------------------------------------------------------------------

Value schema_to_json(const ToolSchema& schema) {
    Value out = Value::object();
    out["name"] = schema.name;
    out["description"] = schema.description;
    Value params = Value::array();
    for (const auto& param : schema.parameters) {
        Value p = Value::object();
        p["name"] = param.name;
        p["type"] = to_string(param.type);
        p["required"] = param.required;
        p["description"] = param.description;
        params.push_back(std::move(p));
    }
    out["parameters"] = std::move(params);
    return out;
}

ToolSchema schema_from_json(const Value& json) {
    ToolSchema schema;
    schema.name = json.at("name").get<std::string>();
    schema.description = json.at("description").get<std::string>();
    for (const auto& p : json.at("parameters")) {
        ParamSpec param;
        param.name = p.at("name").get<std::string>();
        param.type = type_tag_from_string(p.at("type").get<std::string>());
        param.required = p.at("required").get<bool>();
        param.description = p.value("description", std::string());
        schema.parameters.push_back(std::move(param));
    }
    return schema;
}

Value schemas_to_openai_tools(const std::vector<ToolSchema>& schemas) {
    auto openai_type = [](TypeTag tag) -> std::string {
        switch (tag) {
            case TypeTag::String: return "string";
            case TypeTag::Integer: return "integer";
            case TypeTag::Number: return "number";
            case TypeTag::Boolean: return "boolean";
            case TypeTag::List: return "array";
        }
        return "string";
    };
    Value tools = Value::array();
    for (const auto& schema : schemas) {
        Value properties = Value::object();
        Value required = Value::array();
        for (const auto& param : schema.parameters) {
            Value prop = Value::object();
            prop["type"] = openai_type(param.type);
            if (!param.description.empty()) prop["description"] = param.description;
            properties[param.name] = std::move(prop);
            if (param.required) required.push_back(param.name);
        }
        Value fn = Value::object();
        fn["name"] = schema.name;
        fn["description"] = schema.description;
        fn["parameters"] = {{"type", "object"},
                            {"properties", std::move(properties)},
                            {"required", std::move(required)}};
        Value tool = Value::object();
        tool["type"] = "function";
        tool["function"] = std::move(fn);
        tools.push_back(std::move(tool));
    }
    return tools;
}

std::string render_tools_prompt(const Catalog& catalog) {
    Value listing = Value::array();
    for (const auto& schema : catalog.tools) listing.push_back(schema_to_json(schema));

    std::string prompt;
    prompt += "You can use the tools listed below. They are the only tools that exist;\n";
    prompt += "names not in this list cannot be invoked.\n\n";
    prompt += kToolsFence;
    prompt += "\n";
    prompt += listing.dump(2);
    prompt += "\n```\n\n";
    prompt += "To use a tool, reply with exactly one block of this form and nothing\n";
    prompt += "after it:\n\n";
    prompt += kCallFence;
    prompt += "\n";
    prompt += "{\"tool\": \"<name>\", \"arguments\": {\"<param>\": <value>}}\n";
    prompt += "```\n\n";
    prompt += "The tool's output will come back in the next message. When no tool is\n";
    prompt += "needed, reply with plain text.\n";
    return prompt;
}

std::vector<ToolSchema> parse_tools_prompt(const std::string& prompt) {
    for (const auto& block : fenced_blocks(prompt, kToolsFence)) {
        if (!block.closed) continue;
        Value listing = Value::parse(block.content, nullptr, false);
        if (listing.is_discarded() || !listing.is_array()) continue;
        std::vector<ToolSchema> schemas;
        for (const auto& item : listing) schemas.push_back(schema_from_json(item));
        return schemas;
    }
    return {};
}

} // namespace npcsh

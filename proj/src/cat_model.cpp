#include "npcsh/cat_model.hpp"

#include <algorithm>
#include <set>

#include <yaml-cpp/yaml.h>

#include "npcsh/builtins.hpp"
#include "npcsh/error.hpp"
#include "npcsh/jinx_engine.hpp"

namespace npcsh {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// YAML helpers
// ---------------------------------------------------------------------------

namespace {

std::string where(const fs::path& origin) {
    return origin.empty() ? std::string("<string>") : origin.string();
}

YAML::Node load_yaml_map(const std::string& source, const fs::path& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(source);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::MalformedDocument, where(origin) + ": " + e.what());
    }
    if (!root.IsMap()) {
        throw Error(ErrorKind::MalformedDocument,
                    where(origin) + ": document is not a key/value map");
    }
    return root;
}

void reject_unknown_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                         const std::string& what, const fs::path& origin) {
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            throw Error(ErrorKind::MalformedDocument,
                        where(origin) + ": unknown key '" + key + "' in " + what);
        }
    }
}

std::string require_scalar(const YAML::Node& node, const std::string& key,
                           const std::string& what, const fs::path& origin) {
    const YAML::Node field = node[key];
    if (!field || field.IsNull()) {
        throw Error(ErrorKind::MissingField, where(origin) + ": " + what + " needs '" + key + "'");
    }
    if (!field.IsScalar()) {
        throw Error(ErrorKind::MalformedDocument,
                    where(origin) + ": '" + key + "' in " + what + " must be a scalar");
    }
    return field.as<std::string>();
}

std::string optional_scalar(const YAML::Node& node, const std::string& key,
                            const std::string& fallback = "") {
    const YAML::Node field = node[key];
    if (!field || field.IsNull()) return fallback;
    return field.as<std::string>();
}

bool is_identifier(const std::string& name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
}

void require_identifier(const std::string& name, const std::string& what,
                        const fs::path& origin) {
    if (!is_identifier(name)) {
        throw Error(ErrorKind::MalformedDocument,
                    where(origin) + ": '" + name + "' is not a valid " + what + " name");
    }
}

// Converts a YAML scalar/sequence into a typed Value per the declared tag.
Value yaml_to_value(const YAML::Node& node, TypeTag tag, const std::string& what,
                    const fs::path& origin) {
    auto fail = [&]() -> Value {
        throw Error(ErrorKind::MalformedDocument,
                    where(origin) + ": " + what + " does not match declared type '" +
                        to_string(tag) + "'");
    };
    try {
        switch (tag) {
            case TypeTag::String:
                if (!node.IsScalar()) return fail();
                return Value(node.as<std::string>());
            case TypeTag::Integer:
                if (!node.IsScalar()) return fail();
                return Value(node.as<long long>());
            case TypeTag::Number:
                if (!node.IsScalar()) return fail();
                return Value(node.as<double>());
            case TypeTag::Boolean:
                if (!node.IsScalar()) return fail();
                return Value(node.as<bool>());
            case TypeTag::List: {
                if (!node.IsSequence()) return fail();
                Value out = Value::array();
                for (const auto& item : node) {
                    if (item.IsScalar()) {
                        // Not declared element-by-element; sniff the scalar.
                        const std::string text = item.as<std::string>();
                        if (auto i = coerce_value(TypeTag::Integer, Value(text))) {
                            out.push_back(*i);
                        } else if (auto d = coerce_value(TypeTag::Number, Value(text))) {
                            out.push_back(*d);
                        } else if (auto b = coerce_value(TypeTag::Boolean, Value(text))) {
                            out.push_back(*b);
                        } else {
                            out.push_back(text);
                        }
                    } else {
                        return fail();
                    }
                }
                return out;
            }
        }
    } catch (const YAML::Exception&) {
        return fail();
    }
    return fail();
}

} // namespace

// ---------------------------------------------------------------------------
// JinxDef / NpcDef / ContextDef parsing
// ---------------------------------------------------------------------------

const InputDecl* JinxDef::find_input(const std::string& input_name) const {
    for (const auto& input : inputs) {
        if (input.name == input_name) return &input;
    }
    return nullptr;
}

void validate_jinx_def(const JinxDef& jinx) {
    const fs::path& origin = jinx.source_path;
    if (jinx.name.empty()) {
        throw Error(ErrorKind::MissingField, where(origin) + ": Jinx needs 'jinx_name'");
    }
    if (jinx.description.empty()) {
        throw Error(ErrorKind::MissingField,
                    where(origin) + ": Jinx '" + jinx.name + "' needs 'description'");
    }
    if (jinx.steps.empty()) {
        throw Error(ErrorKind::MissingField,
                    where(origin) + ": Jinx '" + jinx.name + "' needs at least one step");
    }
    std::set<std::string> seen;
    for (const auto& input : jinx.inputs) {
        if (input.name.empty()) {
            throw Error(ErrorKind::MissingField, where(origin) + ": input needs 'name'");
        }
        if (!seen.insert(input.name).second) {
            throw Error(ErrorKind::DuplicateName,
                        where(origin) + ": duplicate input '" + input.name + "'");
        }
        if (!input.required && !input.default_value) {
            throw Error(ErrorKind::MissingField,
                        where(origin) + ": optional input '" + input.name + "' needs a default");
        }
        if (input.default_value && !value_matches(input.type, *input.default_value)) {
            throw Error(ErrorKind::MalformedDocument,
                        where(origin) + ": default for '" + input.name +
                            "' does not match declared type '" + to_string(input.type) + "'");
        }
    }
    // Step names share a namespace with inputs: both become template bindings.
    for (const auto& step : jinx.steps) {
        if (step.name.empty()) {
            throw Error(ErrorKind::MissingField, where(origin) + ": step needs 'name'");
        }
        if (step.engine.empty()) {
            throw Error(ErrorKind::MissingField,
                        where(origin) + ": step '" + step.name + "' needs 'engine'");
        }
        if (!seen.insert(step.name).second) {
            throw Error(ErrorKind::DuplicateName,
                        where(origin) + ": step name '" + step.name +
                            "' collides with another step or input");
        }
    }
}

JinxDef parse_jinx(const std::string& source, const fs::path& origin) {
    YAML::Node root = load_yaml_map(source, origin);
    reject_unknown_keys(root, {"jinx_name", "description", "inputs", "steps"}, "Jinx document",
                        origin);

    JinxDef jinx;
    jinx.source_path = origin;
    jinx.name = require_scalar(root, "jinx_name", "Jinx document", origin);
    require_identifier(jinx.name, "Jinx", origin);
    jinx.description = require_scalar(root, "description", "Jinx document", origin);

    if (const YAML::Node inputs = root["inputs"]) {
        if (!inputs.IsSequence()) {
            throw Error(ErrorKind::MalformedDocument,
                        where(origin) + ": 'inputs' must be a list");
        }
        for (const auto& node : inputs) {
            if (!node.IsMap()) {
                throw Error(ErrorKind::MalformedDocument,
                            where(origin) + ": each input must be a map");
            }
            reject_unknown_keys(node, {"name", "type", "required", "default", "description"},
                                "input", origin);
            InputDecl decl;
            decl.name = require_scalar(node, "name", "input", origin);
            require_identifier(decl.name, "input", origin);
            decl.type = type_tag_from_string(optional_scalar(node, "type", "string"));
            if (const YAML::Node req = node["required"]) decl.required = req.as<bool>();
            decl.description = optional_scalar(node, "description");
            if (const YAML::Node def = node["default"]; def && !def.IsNull()) {
                decl.default_value =
                    yaml_to_value(def, decl.type, "default for input '" + decl.name + "'", origin);
            }
            jinx.inputs.push_back(std::move(decl));
        }
    }

    if (const YAML::Node steps = root["steps"]) {
        if (!steps.IsSequence()) {
            throw Error(ErrorKind::MalformedDocument, where(origin) + ": 'steps' must be a list");
        }
        for (const auto& node : steps) {
            if (!node.IsMap()) {
                throw Error(ErrorKind::MalformedDocument,
                            where(origin) + ": each step must be a map");
            }
            reject_unknown_keys(node, {"name", "engine", "code", "args"}, "step", origin);
            StepDef step;
            step.name = require_scalar(node, "name", "step", origin);
            require_identifier(step.name, "step", origin);
            step.engine = require_scalar(node, "engine", "step", origin);
            step.body = optional_scalar(node, "code");
            if (const YAML::Node args = node["args"]) {
                if (!args.IsMap()) {
                    throw Error(ErrorKind::MalformedDocument,
                                where(origin) + ": step 'args' must be a map");
                }
                for (const auto& kv : args) {
                    step.args[kv.first.as<std::string>()] = kv.second.as<std::string>();
                }
            }
            jinx.steps.push_back(std::move(step));
        }
    }

    validate_jinx_def(jinx);
    return jinx;
}

NpcDef parse_npc(const std::string& source, const fs::path& origin) {
    YAML::Node root = load_yaml_map(source, origin);
    reject_unknown_keys(root, {"name", "primary_directive", "model", "provider", "jinxs"},
                        "NPC document", origin);

    NpcDef npc;
    npc.source_path = origin;
    npc.name = require_scalar(root, "name", "NPC document", origin);
    require_identifier(npc.name, "NPC", origin);
    npc.directive = require_scalar(root, "primary_directive", "NPC document", origin);
    npc.model = optional_scalar(root, "model");
    npc.provider = optional_scalar(root, "provider");

    if (const YAML::Node jinxs = root["jinxs"]; jinxs && !jinxs.IsNull()) {
        if (!jinxs.IsSequence()) {
            throw Error(ErrorKind::MalformedDocument,
                        where(origin) + ": 'jinxs' must be a list of names");
        }
        std::set<std::string> seen;
        for (const auto& node : jinxs) {
            std::string name = node.as<std::string>();
            if (!seen.insert(name).second) {
                throw Error(ErrorKind::DuplicateName,
                            where(origin) + ": jinx list repeats '" + name + "'");
            }
            npc.jinx_list.push_back(std::move(name));
        }
    }
    return npc;
}

ContextDef parse_context(const std::string& source, const fs::path& origin) {
    YAML::Node root = load_yaml_map(source, origin);
    reject_unknown_keys(root, {"orchestrator", "description", "env", "model", "provider"},
                        "context document", origin);

    ContextDef ctx;
    ctx.orchestrator = require_scalar(root, "orchestrator", "context document", origin);
    ctx.description = optional_scalar(root, "description");
    ctx.default_model = optional_scalar(root, "model");
    ctx.default_provider = optional_scalar(root, "provider");
    if (const YAML::Node env = root["env"]; env && !env.IsNull()) {
        if (!env.IsMap()) {
            throw Error(ErrorKind::MalformedDocument, where(origin) + ": 'env' must be a map");
        }
        for (const auto& kv : env) {
            ctx.env[kv.first.as<std::string>()] = kv.second.as<std::string>();
        }
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void emit_value(YAML::Emitter& out, const Value& value) {
    if (value.is_string()) {
        out << value.get<std::string>();
    } else if (value.is_boolean()) {
        out << value.get<bool>();
    } else if (value.is_number_integer()) {
        out << value.get<long long>();
    } else if (value.is_number()) {
        out << value.get<double>();
    } else if (value.is_array()) {
        out << YAML::BeginSeq;
        for (const auto& item : value) emit_value(out, item);
        out << YAML::EndSeq;
    } else {
        out << YAML::Null;
    }
}

// Literal blocks read best for multi-line bodies, but clip chomping pins the
// text to exactly one trailing newline; fall back to default (quoted)
// emission whenever that would alter the content.
void emit_text(YAML::Emitter& out, const std::string& text) {
    bool literal_safe = text.size() > 1 && text.back() == '\n' &&
                        text[text.size() - 2] != '\n' &&
                        text.find('\n') != std::string::npos;
    if (literal_safe) out << YAML::Literal;
    out << text;
}

} // namespace

std::string to_yaml(const JinxDef& jinx) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "jinx_name" << YAML::Value << jinx.name;
    out << YAML::Key << "description" << YAML::Value << jinx.description;
    if (!jinx.inputs.empty()) {
        out << YAML::Key << "inputs" << YAML::Value << YAML::BeginSeq;
        for (const auto& input : jinx.inputs) {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << input.name;
            out << YAML::Key << "type" << YAML::Value << to_string(input.type);
            out << YAML::Key << "required" << YAML::Value << input.required;
            if (input.default_value) {
                out << YAML::Key << "default" << YAML::Value;
                emit_value(out, *input.default_value);
            }
            if (!input.description.empty()) {
                out << YAML::Key << "description" << YAML::Value << input.description;
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::Key << "steps" << YAML::Value << YAML::BeginSeq;
    for (const auto& step : jinx.steps) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << step.name;
        out << YAML::Key << "engine" << YAML::Value << step.engine;
        if (!step.body.empty()) {
            out << YAML::Key << "code" << YAML::Value;
            emit_text(out, step.body);
        }
        if (!step.args.empty()) {
            out << YAML::Key << "args" << YAML::Value << YAML::BeginMap;
            for (const auto& [k, v] : step.args) out << YAML::Key << k << YAML::Value << v;
            out << YAML::EndMap;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string to_yaml(const NpcDef& npc) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << npc.name;
    out << YAML::Key << "primary_directive" << YAML::Value;
    emit_text(out, npc.directive);
    if (!npc.model.empty()) out << YAML::Key << "model" << YAML::Value << npc.model;
    if (!npc.provider.empty()) out << YAML::Key << "provider" << YAML::Value << npc.provider;
    out << YAML::Key << "jinxs" << YAML::Value << YAML::BeginSeq;
    for (const auto& name : npc.jinx_list) out << name;
    out << YAML::EndSeq << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string to_yaml(const ContextDef& ctx) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "orchestrator" << YAML::Value << ctx.orchestrator;
    if (!ctx.description.empty()) {
        out << YAML::Key << "description" << YAML::Value << ctx.description;
    }
    if (!ctx.env.empty()) {
        out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : ctx.env) out << YAML::Key << k << YAML::Value << v;
        out << YAML::EndMap;
    }
    if (!ctx.default_model.empty()) {
        out << YAML::Key << "model" << YAML::Value << ctx.default_model;
    }
    if (!ctx.default_provider.empty()) {
        out << YAML::Key << "provider" << YAML::Value << ctx.default_provider;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Team loading
// ---------------------------------------------------------------------------

const NpcDef* Team::find_npc(const std::string& npc_name) const {
    auto it = npcs.find(npc_name);
    return it == npcs.end() ? nullptr : &it->second;
}

Team::NpcLocation Team::find_npc_recursive(const std::string& npc_name) const {
    if (const NpcDef* npc = find_npc(npc_name)) return {npc, this};
    for (const auto& [_, sub] : sub_teams) {
        if (auto found = sub->find_npc_recursive(npc_name); found.npc) return found;
    }
    return {};
}

namespace {

std::string read_file(const fs::path& path) {
    std::error_code ec;
    auto size = fs::file_size(path, ec);
    std::string content(ec ? 0 : size, '\0');
    FILE* f = fopen(path.c_str(), "rb");
    if (!f) throw Error(ErrorKind::MalformedDocument, "cannot open " + path.string());
    size_t got = fread(content.data(), 1, content.size(), f);
    fclose(f);
    content.resize(got);
    return content;
}

// Sorted directory listing so loads are deterministic across filesystems.
std::vector<fs::path> sorted_entries(const fs::path& dir) {
    std::vector<fs::path> entries;
    for (const auto& entry : fs::directory_iterator(dir)) entries.push_back(entry.path());
    std::sort(entries.begin(), entries.end());
    return entries;
}

bool directory_has_context(const fs::path& dir) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ctx") return true;
    }
    return false;
}

void collect_jinx_files(const fs::path& dir, Team& team) {
    for (const auto& path : sorted_entries(dir)) {
        if (fs::is_directory(path)) {
            collect_jinx_files(path, team);   // flattened by name, not by path
            continue;
        }
        if (path.extension() != ".jinx") continue;
        JinxDef jinx = parse_jinx(read_file(path), path);
        if (jinx.name != path.stem().string()) {
            team.warnings.push_back("jinx '" + jinx.name + "' declared in file named '" +
                                    path.filename().string() + "'");
        }
        auto [it, inserted] = team.jinx_catalog.emplace(jinx.name, std::move(jinx));
        if (!inserted) {
            throw Error(ErrorKind::DuplicateJinxName,
                        "jinx '" + it->first + "' defined in both " +
                            it->second.source_path.string() + " and " + path.string());
        }
    }
}

std::unique_ptr<Team> load_team_dir(const fs::path& dir, const Team* parent) {
    auto team = std::make_unique<Team>();
    team->path = fs::absolute(dir);
    team->parent = parent;

    std::vector<fs::path> context_files;
    std::vector<fs::path> npc_files;
    std::vector<fs::path> sub_dirs;
    fs::path jinxes_dir;

    for (const auto& path : sorted_entries(dir)) {
        if (fs::is_directory(path)) {
            if (path.filename() == "jinxes") {
                jinxes_dir = path;
            } else if (directory_has_context(path)) {
                sub_dirs.push_back(path);
            }
            continue;
        }
        if (path.extension() == ".ctx") context_files.push_back(path);
        if (path.extension() == ".npc") npc_files.push_back(path);
    }

    if (context_files.empty()) {
        throw Error(ErrorKind::NoContextFile, "no .ctx file in " + dir.string());
    }
    if (context_files.size() > 1) {
        throw Error(ErrorKind::MalformedDocument,
                    dir.string() + " has more than one .ctx file");
    }
    team->context = parse_context(read_file(context_files[0]), context_files[0]);

    for (const auto& path : npc_files) {
        NpcDef npc = parse_npc(read_file(path), path);
        if (npc.name != path.stem().string()) {
            team->warnings.push_back("NPC '" + npc.name + "' declared in file named '" +
                                     path.filename().string() + "'");
        }
        auto [it, inserted] = team->npcs.emplace(npc.name, std::move(npc));
        if (!inserted) {
            throw Error(ErrorKind::DuplicateName,
                        "NPC '" + it->first + "' defined twice under " + dir.string());
        }
    }

    if (!jinxes_dir.empty()) collect_jinx_files(jinxes_dir, *team);

    for (const auto& sub_dir : sub_dirs) {
        auto sub = load_team_dir(sub_dir, team.get());
        std::string sub_name = sub_dir.filename().string();
        if (team->npcs.count(sub_name)) {
            throw Error(ErrorKind::DuplicateName,
                        "sub-team '" + sub_name + "' collides with an NPC name in " +
                            dir.string());
        }
        for (const auto& w : sub->warnings) team->warnings.push_back(w);
        sub->warnings.clear();
        team->sub_teams.emplace(std::move(sub_name), std::move(sub));
    }

    if (!team->find_npc(team->context.orchestrator)) {
        throw Error(ErrorKind::UnresolvedOrchestrator,
                    "orchestrator '" + team->context.orchestrator + "' is not an NPC in " +
                        dir.string());
    }
    return team;
}

} // namespace

std::unique_ptr<Team> load_team(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(ErrorKind::NoContextFile, dir.string() + " is not a directory");
    }
    return load_team_dir(dir, nullptr);
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

const JinxDef* try_resolve_jinx(const std::string& name, const Team& scope) {
    for (const Team* team = &scope; team; team = team->parent) {
        auto it = team->jinx_catalog.find(name);
        if (it != team->jinx_catalog.end()) return &it->second;
    }
    return find_builtin_jinx(name);
}

const JinxDef& resolve_jinx(const std::string& name, const Team& scope) {
    if (const JinxDef* jinx = try_resolve_jinx(name, scope)) return *jinx;
    throw Error(ErrorKind::UnknownJinx, "'" + name + "' is not defined in scope '" +
                                            scope.path.string() + "' or any ancestor");
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void validate_into(const Team& team, std::vector<Diagnostic>& out) {
    for (const auto& [npc_name, npc] : team.npcs) {
        for (const auto& jinx_name : npc.jinx_list) {
            if (!try_resolve_jinx(jinx_name, team)) {
                out.push_back({"UnresolvedJinxRef", npc_name,
                               "NPC '" + npc_name + "' lists unknown jinx '" + jinx_name + "'"});
            }
        }
    }

    if (!team.find_npc(team.context.orchestrator)) {
        out.push_back({"MissingOrchestrator", team.name(),
                       "orchestrator '" + team.context.orchestrator + "' not found"});
    }

    JinxResolver resolver = [&team](const std::string& name) {
        return try_resolve_jinx(name, team);
    };
    for (const auto& [jinx_name, jinx] : team.jinx_catalog) {
        try {
            expansion_graph(jinx, resolver);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::CycleDetected) {
                out.push_back({"CycleDetected", jinx_name, e.what()});
            } else {
                out.push_back({"UnresolvedEngineRef", jinx_name, e.what()});
            }
        }
    }

    for (const auto& [sub_name, sub] : team.sub_teams) {
        if (sub->context.description.empty()) {
            out.push_back({"EmptyDescription", sub_name,
                           "sub-team '" + sub_name + "' has no description; the parent team "
                           "routes on the description alone"});
        }
        validate_into(*sub, out);
    }
}

} // namespace

std::vector<Diagnostic> validate_team(const Team& team) {
    std::vector<Diagnostic> out;
    validate_into(team, out);
    return out;
}

} // namespace npcsh

#include "npcsh/shell.hpp"

#include <iostream>
#include <sstream>

#include "npcsh/builtins.hpp"
#include "npcsh/error.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Line tokenizing and slash-arg parsing
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize_command_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::string current;
    bool in_token = false;
    char quote = '\0';
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quote) {
            if (c == quote) {
                quote = '\0';
            } else if (c == '\\' && quote == '"' && i + 1 < line.size() &&
                       (line[i + 1] == '"' || line[i + 1] == '\\')) {
                current += line[++i];
            } else {
                current += c;
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
        } else if (c == '\\' && i + 1 < line.size()) {
            current += line[++i];
            in_token = true;
        } else if (c == ' ' || c == '\t') {
            if (in_token) {
                tokens.push_back(std::move(current));
                current.clear();
                in_token = false;
            }
        } else {
            current += c;
            in_token = true;
        }
    }
    if (quote) throw Error(ErrorKind::BadArgs, "unterminated quote");
    if (in_token) tokens.push_back(std::move(current));
    return tokens;
}

Bindings parse_slash_args(const std::vector<std::string>& tokens, const JinxDef& jinx) {
    Bindings args;
    std::string positional;
    bool have_positional = false;

    for (const auto& token : tokens) {
        size_t eq = token.find('=');
        bool keyed = eq != std::string::npos && eq > 0 &&
                     jinx.find_input(token.substr(0, eq)) != nullptr;
        if (keyed) {
            std::string key = token.substr(0, eq);
            if (args.count(key)) {
                throw Error(ErrorKind::BadArgs, "argument '" + key + "' given twice");
            }
            args[key] = token.substr(eq + 1);
        } else if (!have_positional) {
            positional = token;
            have_positional = true;
        } else {
            positional += " " + token;  // unquoted multi-word trailing string
        }
    }

    if (have_positional) {
        const InputDecl* slot = nullptr;
        for (const auto& input : jinx.inputs) {
            if (input.required && !args.count(input.name)) {
                slot = &input;
                break;
            }
        }
        if (!slot) {
            throw Error(ErrorKind::BadArgs,
                        "unexpected positional argument '" + positional + "'");
        }
        args[slot->name] = positional;
    }
    return args;
}

std::string usage_text(const ToolSchema& schema) {
    std::string usage = "usage: /" + schema.name;
    for (const auto& param : schema.parameters) {
        std::string part = param.name + "=<" + to_string(param.type) + ">";
        usage += param.required ? " " + part : " [" + part + "]";
    }
    usage += "\n  " + schema.description;
    for (const auto& param : schema.parameters) {
        if (!param.description.empty()) {
            usage += "\n  " + param.name + ": " + param.description;
        }
    }
    return usage;
}

// ---------------------------------------------------------------------------
// Default team
// ---------------------------------------------------------------------------

std::unique_ptr<Team> default_team() {
    auto team = std::make_unique<Team>();
    team->path = "<default>";
    team->context.orchestrator = "sage";
    team->context.description = "Zero-config team over the packaged Jinx catalog.";

    NpcDef sage;
    sage.name = "sage";
    sage.directive =
        "You are sage, a capable general-purpose assistant. Use your tools to "
        "act on the user's machine when a request calls for it, and answer "
        "directly when it does not.";
    for (const auto& [name, _] : builtin_catalog()) sage.jinx_list.push_back(name);
    team->npcs.emplace(sage.name, std::move(sage));
    return team;
}

// ---------------------------------------------------------------------------
// Shell
// ---------------------------------------------------------------------------

Shell::Shell(ShellConfig config, std::unique_ptr<ChatClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
    if (!client_) {
        client_ = std::make_unique<HttpChatClient>(resolve_provider(config_.provider));
    }
    team_ = config_.team_dir.empty() ? default_team() : load_team(config_.team_dir);
    for (const auto& warning : team_->warnings) {
        if (config_.verbosity >= 1) std::cerr << "warning: " << warning << "\n";
    }
}

AgentEnv Shell::make_env() {
    AgentEnv env;
    env.client = client_.get();
    env.model = config_.model;
    env.workdir = std::filesystem::current_path();
    env.cancel = &cancel_;
    return env;
}

AgentLimits Shell::make_limits() const {
    return AgentLimits{};
}

DispatchResult Shell::dispatch(const std::string& line) {
    cancel_.store(false);
    std::string trimmed = line;
    while (!trimmed.empty() && (trimmed.back() == '\n' || trimmed.back() == '\r' ||
                                trimmed.back() == ' ')) {
        trimmed.pop_back();
    }
    size_t start = trimmed.find_first_not_of(" \t");
    if (start == std::string::npos) return {"", true, false};
    trimmed = trimmed.substr(start);

    try {
        if (trimmed[0] == '/') return run_slash(trimmed);
        return run_conversation(trimmed);
    } catch (const Error& e) {
        return {std::string("error: ") + e.what(), false, false};
    } catch (const std::exception& e) {
        return {std::string("error: ") + e.what(), false, false};
    }
}

DispatchResult Shell::run_slash(const std::string& line) {
    std::vector<std::string> tokens = tokenize_command_line(line.substr(1));
    if (tokens.empty()) {
        throw Error(ErrorKind::UnknownCommand, "empty slash command");
    }
    std::string name = tokens.front();
    std::vector<std::string> rest(tokens.begin() + 1, tokens.end());

    if (name == "exit" || name == "quit") return {"", true, true};

    if (name == "help") {
        std::string out =
            "/<jinx> key=value ...   run a Jinx directly\n"
            "/npc <name>             talk to a specific NPC (no name: list them)\n"
            "/team <dir>             load a team directory\n"
            "/trace                  show the last conversation's events\n"
            "/help                   this text\n"
            "/exit                   leave\n\nJinxes in scope:";
        std::map<std::string, const JinxDef*> visible;
        for (const auto& [jinx_name, jinx] : builtin_catalog()) visible[jinx_name] = &jinx;
        for (const Team* t = team_.get(); t; t = t->parent) {
            for (const auto& [jinx_name, jinx] : t->jinx_catalog) visible[jinx_name] = &jinx;
        }
        for (const auto& [jinx_name, jinx] : visible) {
            out += "\n  " + jinx_name + " - " + jinx->description;
        }
        return {out, true, false};
    }

    if (name == "npc") {
        if (rest.empty()) {
            std::string out = "NPCs:";
            for (const auto& [npc_name, npc] : team_->npcs) {
                out += "\n  " + npc_name + (npc_name == current_npc_ ? " (current)" : "");
            }
            return {out, true, false};
        }
        if (!team_->find_npc_recursive(rest[0]).npc) {
            throw Error(ErrorKind::UnknownTarget, "no NPC named '" + rest[0] + "'");
        }
        current_npc_ = rest[0];
        return {"now talking to " + current_npc_, true, false};
    }

    if (name == "team") {
        if (rest.empty()) throw Error(ErrorKind::BadArgs, "usage: /team <dir>");
        team_ = load_team(rest[0]);
        current_npc_.clear();
        conversations_.clear();
        return {"loaded team '" + team_->name() + "' (" +
                    std::to_string(team_->npcs.size()) + " NPCs)",
                true, false};
    }

    if (name == "trace") {
        if (last_trace_.empty()) return {"no trace yet", true, false};
        std::string out;
        char buffer[32];
        for (const auto& event : last_trace_) {
            std::snprintf(buffer, sizeof(buffer), "%8.3f", event.t);
            out += std::string(buffer) + "s  " + event.type + "  " + event.data.dump() + "\n";
        }
        while (!out.empty() && out.back() == '\n') out.pop_back();
        return {out, true, false};
    }

    return run_jinx_command(name, rest);
}

DispatchResult Shell::run_jinx_command(const std::string& name,
                                       const std::vector<std::string>& args) {
    const Team* scope = team_.get();
    if (!current_npc_.empty()) {
        if (auto located = team_->find_npc_recursive(current_npc_); located.team) {
            scope = located.team;
        }
    }
    const JinxDef& jinx = resolve_jinx(name, *scope);

    Bindings raw_args;
    try {
        raw_args = parse_slash_args(args, jinx);
    } catch (const Error& e) {
        return {std::string("error: ") + e.what() + "\n" + usage_text(derive_schema(jinx)),
                false, false};
    }

    // The identical codepath an agent-invoked call takes: enforcement over a
    // catalog containing the Jinx, then the shared tool invocation.
    ToolCall call{name, raw_args, "/" + name};
    Catalog catalog = build_catalog("shell", {jinx});
    AuthorizedCall authorized;
    try {
        authorized = enforce(call, catalog);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::MissingRequiredArgument ||
            e.kind() == ErrorKind::ArgumentTypeError) {
            return {std::string("error: ") + e.what() + "\n" +
                        usage_text(derive_schema(jinx)),
                    false, false};
        }
        throw;
    }

    AgentEnv env = make_env();
    last_trace_.clear();
    JinxResult result =
        invoke_tool(*authorized.jinx, authorized.arguments, *scope, env, make_limits(),
                    &last_trace_);

    std::string out;
    if (config_.verbosity >= 2) {
        for (const auto& step : result.outputs) {
            out += "[" + step.step_name + ":" + step.engine + "] " +
                   (step.ok ? value_to_text(step.value) : "failed: " + step.error_message) +
                   "\n";
        }
    }
    if (!result.ok) {
        out += "error: " + result.error_message;
        return {out, false, false};
    }
    out += value_to_text(result.final_value);
    return {out, true, false};
}

DispatchResult Shell::run_conversation(const std::string& line) {
    AgentEnv env = make_env();
    AgentLimits limits = make_limits();

    const NpcDef* npc = nullptr;
    const Team* npc_team = team_.get();
    std::string prefix;

    if (!current_npc_.empty()) {
        auto located = team_->find_npc_recursive(current_npc_);
        npc = located.npc;
        npc_team = located.team;
    } else {
        RouteResult routed = route(line, *team_, env, limits);
        npc = routed.npc;
        npc_team = routed.team;
        if (config_.verbosity >= 1 && npc) {
            prefix = "[" + std::string(routed.fallback ? "fallback" : "routed") + " -> " +
                     npc->name + "]\n";
        }
    }
    if (!npc) throw Error(ErrorKind::NoSelection, "nobody available to answer");

    std::vector<ChatMessage>& history = conversations_[npc->name];
    AgentReply reply = agent_loop(*npc, line, *npc_team, env, limits, &history);
    history = reply.messages;
    last_trace_ = reply.trace;

    std::string out = prefix + reply.text;
    if (reply.exhausted) out += "\n[stopped: budget exhausted]";
    return {out, true, false};
}

int Shell::run_once(const std::string& line, std::ostream& out) {
    DispatchResult result = dispatch(line);
    if (!result.output.empty()) out << result.output << "\n";
    return result.ok ? 0 : 1;
}

int Shell::run_interactive(std::istream& in, std::ostream& out) {
    std::string line;
    while (true) {
        out << (current_npc_.empty() ? team_->name() : current_npc_) << "> " << std::flush;
        if (!std::getline(in, line)) {
            out << "\n";
            return 0;
        }
        DispatchResult result = dispatch(line);
        if (!result.output.empty()) out << result.output << "\n";
        if (result.exit_requested) return 0;
    }
}

} // namespace npcsh

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "npcsh/orchestrator.hpp"

namespace npcsh {

struct ShellConfig {
    std::filesystem::path team_dir;  // empty = bundled default team
    std::string model;
    std::string provider = "ollama";
    int verbosity = 0;
};

struct DispatchResult {
    std::string output;
    bool ok = true;
    bool exit_requested = false;
};

// Splits a command line into tokens with shell-style quoting: spaces
// separate, single/double quotes group, backslash escapes inside double
// quotes and bare text.
std::vector<std::string> tokenize_command_line(const std::string& line);

// Parses slash-command arguments against a Jinx: `key=value` tokens bind by
// name; one unkeyed token binds to the first required input. Values stay
// strings here — enforcement coerces them to the declared types.
Bindings parse_slash_args(const std::vector<std::string>& tokens, const JinxDef& jinx);

// Usage line generated from the derived schema.
std::string usage_text(const ToolSchema& schema);

// The bundled zero-config team: one orchestrator NPC wired to the packaged
// Jinx catalog.
std::unique_ptr<Team> default_team();

class Shell {
public:
    // A null client resolves one from config.provider. Tests inject a
    // scripted client.
    Shell(ShellConfig config, std::unique_ptr<ChatClient> client = nullptr);

    // Executes one line: slash commands (/name k=v, /npc, /team, /trace,
    // /help, /exit) or a conversational turn for the current NPC (routing
    // through the orchestrator when none is selected).
    DispatchResult dispatch(const std::string& line);

    int run_interactive(std::istream& in, std::ostream& out);
    int run_once(const std::string& line, std::ostream& out);  // -c mode

    Team& team() { return *team_; }
    const std::string& current_npc() const { return current_npc_; }
    const std::vector<TraceEvent>& last_trace() const { return last_trace_; }
    CancelFlag& cancel_flag() { return cancel_; }

private:
    DispatchResult run_slash(const std::string& line);
    DispatchResult run_jinx_command(const std::string& name,
                                    const std::vector<std::string>& args);
    DispatchResult run_conversation(const std::string& line);
    AgentEnv make_env();
    AgentLimits make_limits() const;

    ShellConfig config_;
    std::unique_ptr<ChatClient> client_;
    std::unique_ptr<Team> team_;
    std::string current_npc_;  // empty = route through the orchestrator
    std::map<std::string, std::vector<ChatMessage>> conversations_;  // per NPC
    std::vector<TraceEvent> last_trace_;
    CancelFlag cancel_{false};
};

} // namespace npcsh

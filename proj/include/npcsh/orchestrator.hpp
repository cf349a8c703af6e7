#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "npcsh/cat_model.hpp"
#include "npcsh/jinx_engine.hpp"
#include "npcsh/llm_gateway.hpp"
#include "npcsh/tool_schema.hpp"
#include "npcsh/value.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct TraceEvent {
    std::string type;  // model_turn | tool_call | tool_result | rejected_call |
                       // malformed_call | corrective | reply | exhausted | ...
    Value data;
    double t = 0.0;    // seconds since the loop started
};

// ---------------------------------------------------------------------------
// Loop configuration
// ---------------------------------------------------------------------------

struct AgentLimits {
    int turn_budget = 12;                       // model calls per loop
    int max_agent_depth = 4;                    // nested delegation
    std::chrono::milliseconds step_timeout{0};  // per engine step; 0 = none
    std::optional<std::chrono::steady_clock::time_point> deadline;  // whole loop
};

// Everything an agent run needs from the outside world.
struct AgentEnv {
    ChatClient* client = nullptr;
    std::string model;                       // session default; NPC may override
    bool native_tools = false;               // provider handles schemas itself
    std::filesystem::path workdir;           // empty = process cwd
    std::map<std::string, std::string> env;  // exported to engine subprocesses
    int agent_depth = 0;                     // current delegation nesting
    const CancelFlag* cancel = nullptr;
};

struct AgentReply {
    std::string text;
    bool exhausted = false;      // turn budget or deadline hit
    bool timed_out = false;      // specifically the deadline
    int model_turns = 0;
    int tool_calls = 0;          // calls that passed enforcement
    std::vector<TraceEvent> trace;
    std::vector<ChatMessage> messages;  // the conversation after this run
};

// Picks the model an NPC speaks with: NPC override, else team default, else
// the session default.
std::string effective_model(const NpcDef& npc, const Team& team, const AgentEnv& env);

// ---------------------------------------------------------------------------
// The agent loop
// ---------------------------------------------------------------------------

// Runs `npc` on one user message: model turn -> tool-call parse ->
// enforcement -> Jinx execution -> result feedback, until the model answers
// in plain text or the budget runs out. UnknownTool / MalformedCall inject a
// corrective message and continue; budget exhaustion is flagged, not thrown.
// When `history` is given the conversation continues from it (the system
// prompt is only installed on an empty history).
AgentReply agent_loop(const NpcDef& npc, const std::string& user_message, const Team& team,
                      AgentEnv& env, const AgentLimits& limits,
                      const std::vector<ChatMessage>* history = nullptr);

// Executes one authorized tool invocation — the single codepath shared by
// slash commands and agent-initiated calls, so both produce identical
// results for identical inputs. Delegation Jinxes (any resolved Jinx named
// "delegate" declaring target/request inputs) run the iterative delegation
// protocol; everything else is a plain execute_jinx.
JinxResult invoke_tool(const JinxDef& jinx, const Bindings& args, const Team& team,
                       AgentEnv& env, const AgentLimits& limits,
                       std::vector<TraceEvent>* trace = nullptr);

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

struct RoutingEntry {
    std::string name;
    std::string description;
    enum class Kind { npc, sub_team } kind = Kind::npc;
};

// What the orchestrator sees: its own NPCs (name + directive first line) and
// one opaque entry per sub-team (context description only — member NPCs and
// their catalogs never appear).
struct RoutingView {
    std::vector<RoutingEntry> entries;
};

RoutingView routing_view(const Team& team);
std::string serialize(const RoutingView& view);

struct RouteResult {
    const NpcDef* npc = nullptr;      // who should answer
    const Team* team = nullptr;       // the team that NPC belongs to
    std::vector<std::string> path;    // selections made, outermost first
    std::string rationale;
    bool fallback = false;            // NoSelection: orchestrator answers itself
};

// Asks the team's orchestrator (via the same enforcement machinery, with a
// synthetic single-tool catalog) to pick a routing entry. Sub-team picks
// recurse into that sub-team's orchestrator. After two invalid selections
// the orchestrator itself is returned with fallback=true.
RouteResult route(const std::string& request, const Team& team, AgentEnv& env,
                  const AgentLimits& limits);

// ---------------------------------------------------------------------------
// Delegation
// ---------------------------------------------------------------------------

struct DelegationSpec {
    std::string target;            // NPC or sub-team name
    std::string task;
    std::string completion_criteria;
    int max_iterations = 3;
    enum class FeedbackMode { verbatim, summarized } feedback_mode = FeedbackMode::verbatim;
};

struct DelegationOutcome {
    std::string result;      // the target's last response
    int iterations_used = 0;
    bool satisfied = false;
    std::vector<TraceEvent> trace;
};

// Runs the delegation protocol: the target attempts the task, a checker
// model turn judges the output against the criteria, and unsatisfied rounds
// feed the checker's feedback into the next attempt. The per-iteration
// mechanics live in the shipped delegate.jinx (nearest-scope shadowable), so
// editing that file changes how criteria are evaluated.
DelegationOutcome delegate(const DelegationSpec& spec, const Team& team, AgentEnv& env,
                           const AgentLimits& limits);

// ---------------------------------------------------------------------------
// Skills
// ---------------------------------------------------------------------------

// A skill is a Jinx whose single step has engine `static` and whose body is
// heading-structured text served section by section.
bool is_skill(const JinxDef& jinx);
std::vector<std::string> skill_headings(const JinxDef& skill);

// Returns the body under the first heading matching `section`
// (case-insensitive, '#' markers and surrounding space ignored). The
// reserved section "toc" returns the heading list, one per line. Unknown
// sections raise UnknownSection naming the available headings.
std::string retrieve_skill_section(const JinxDef& skill, const std::string& section);

} // namespace npcsh

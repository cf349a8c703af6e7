#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npcsh/cat_model.hpp"
#include "npcsh/error.hpp"
#include "npcsh/subprocess.hpp"
#include "npcsh/value.hpp"

namespace npcsh {

// Resolves a Jinx name within some scope; nullptr when nothing is in scope.
using JinxResolver = std::function<const JinxDef*(const std::string&)>;

// ---------------------------------------------------------------------------
// Static structure
// ---------------------------------------------------------------------------

struct ExpansionGraph {
    // Topologically ordered: every edge points from an earlier node to a
    // later one; the root Jinx is first.
    std::vector<std::string> nodes;
    // Sorted unique (user, used) pairs.
    std::vector<std::pair<std::string, std::string>> edges;

    bool has_edge(const std::string& from, const std::string& to) const;
};

// Builds the call graph rooted at `jinx`. An edge J -> K exists when a step
// of J names engine K and K resolves to a Jinx. A step whose engine equals
// the enclosing Jinx's own name stays a leaf when that name is also a
// built-in engine id (the wrapper pattern); otherwise it is a self-cycle.
// Throws CycleDetected (message carries the cycle path) or UnknownJinx when
// an engine is neither built-in nor resolvable.
ExpansionGraph expansion_graph(const JinxDef& jinx, const JinxResolver& resolve);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

// Callbacks for the engines this layer does not own. Model access and agent
// delegation are injected by the orchestrator (or a scripted test double).
struct EngineHooks {
    std::function<std::string(const std::string& prompt)> llm;
    std::function<std::string(const std::string& request)> agent;
};

struct ExecContext {
    Bindings bindings;                       // inputs plus completed step values
    std::filesystem::path workdir;           // empty = inherit the process cwd
    std::map<std::string, std::string> env;  // exported to subprocess engines
    int depth = 0;                           // current expansion depth
    int max_depth = 8;
    int budget = 64;                         // remaining step executions
    std::chrono::milliseconds step_timeout{0};  // 0 = unbounded
    const CancelFlag* cancel = nullptr;
    EngineHooks hooks;
    JinxResolver resolve;                    // empty = built-ins only
};

struct StepOutput {
    std::string step_name;
    std::string engine;
    Value value;               // what later templates see under the step name
    std::string stdout_text;
    std::string stderr_text;
    bool ok = true;
    std::optional<ErrorKind> error;
    std::string error_message;
    int exit_code = 0;
    double duration_s = 0.0;
};

struct JinxResult {
    std::string jinx_name;
    bool ok = false;
    Value final_value;               // last completed step's value
    std::vector<StepOutput> outputs; // this Jinx's own steps, execution order
    std::optional<ErrorKind> error;
    std::string error_message;
};

// Runs the steps of `jinx` strictly in order. `args` must cover every
// required input with a type-compatible value (lossless string coercion is
// applied); defaults fill the rest; unknown argument names are rejected.
// Each step's body is rendered against the accumulated bindings, dispatched
// to its engine, and its value bound under the step's name before the next
// step renders. Execution stops at the first failed step.
//
// Throws MissingInput / TypeMismatch / BadArgs for argument problems;
// everything that goes wrong after binding is reported in the result.
JinxResult execute_jinx(const JinxDef& jinx, const Bindings& args, ExecContext& ctx);

// Renders and runs a single step against ctx.bindings. Built-in engines:
// sh/bash run the body through the system shell, python through an external
// interpreter (configured by the NPCSH_PYTHON environment entry), llm/agent
// call the hooks, static binds the rendered body verbatim. Any other engine
// name recursively executes the Jinx it resolves to, with the step's args
// map (values themselves template-rendered) as that Jinx's arguments.
StepOutput execute_step(const StepDef& step, ExecContext& ctx);

} // namespace npcsh

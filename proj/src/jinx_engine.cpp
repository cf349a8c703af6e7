#include "npcsh/jinx_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <unistd.h>

#include "npcsh/builtins.hpp"
#include "npcsh/render.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Expansion graph
// ---------------------------------------------------------------------------

bool ExpansionGraph::has_edge(const std::string& from, const std::string& to) const {
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(from, to));
}

namespace {

// Engine names of `jinx` that refer to other Jinxes, first-occurrence order.
// The wrapper pattern — a step whose engine is the Jinx's own name while
// that name is also a built-in id — is a leaf, not a self-edge.
std::vector<std::string> jinx_children(const JinxDef& jinx, const JinxResolver& resolve) {
    std::vector<std::string> children;
    std::set<std::string> seen;
    for (const auto& step : jinx.steps) {
        const std::string& engine = step.engine;
        if (engine == jinx.name && is_builtin_engine(engine)) continue;
        if (engine != jinx.name) {
            const JinxDef* target = resolve ? resolve(engine) : nullptr;
            if (!target) {
                if (is_builtin_engine(engine)) continue;
                throw Error(ErrorKind::UnknownJinx,
                            "step '" + step.name + "' of '" + jinx.name +
                                "' names engine '" + engine +
                                "' which is neither built-in nor a known Jinx");
            }
        }
        if (seen.insert(engine).second) children.push_back(engine);
    }
    return children;
}

struct GraphWalker {
    const JinxResolver& resolve;
    std::map<std::string, int> color;  // 0 unvisited, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::vector<std::string> post_order;
    std::set<std::pair<std::string, std::string>> edges;

    void visit(const JinxDef& jinx) {
        color[jinx.name] = 1;
        stack.push_back(jinx.name);
        for (const auto& child : jinx_children(jinx, resolve)) {
            edges.emplace(jinx.name, child);
            int state = color.count(child) ? color[child] : 0;
            if (state == 1) {
                std::string path;
                auto it = std::find(stack.begin(), stack.end(), child);
                for (; it != stack.end(); ++it) path += *it + " -> ";
                throw Error(ErrorKind::CycleDetected, "cycle: " + path + child);
            }
            if (state == 2) continue;
            const JinxDef* target = resolve(child);
            // jinx_children already proved resolvability for non-self names;
            // a self-reference that is not a built-in wrapper reaches here.
            if (!target || child == jinx.name) {
                throw Error(ErrorKind::CycleDetected, "cycle: " + jinx.name + " -> " + child);
            }
            visit(*target);
        }
        stack.pop_back();
        color[jinx.name] = 2;
        post_order.push_back(jinx.name);
    }
};

} // namespace

ExpansionGraph expansion_graph(const JinxDef& jinx, const JinxResolver& resolve) {
    GraphWalker walker{resolve};
    walker.visit(jinx);

    ExpansionGraph graph;
    graph.nodes.assign(walker.post_order.rbegin(), walker.post_order.rend());
    graph.edges.assign(walker.edges.begin(), walker.edges.end());
    return graph;
}

// ---------------------------------------------------------------------------
// Step dispatch
// ---------------------------------------------------------------------------

namespace {

std::string strip_trailing_newlines(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

StepOutput fail_step(StepOutput out, ErrorKind kind, std::string message) {
    out.ok = false;
    out.error = kind;
    out.error_message = std::move(message);
    return out;
}

CommandOptions command_options(const ExecContext& ctx) {
    CommandOptions opts;
    opts.workdir = ctx.workdir;
    opts.env = ctx.env;
    opts.timeout = ctx.step_timeout;
    opts.cancel = ctx.cancel;
    return opts;
}

StepOutput finish_command(StepOutput out, const CommandResult& result) {
    out.stdout_text = result.out;
    out.stderr_text = result.err;
    out.exit_code = result.exit_code;
    out.duration_s = result.duration_s;
    if (result.cancelled) {
        return fail_step(std::move(out), ErrorKind::StepFailed, "interrupted");
    }
    if (result.timed_out) {
        return fail_step(std::move(out), ErrorKind::Timeout,
                         "step exceeded its wall-clock bound");
    }
    if (result.exit_code != 0) {
        std::string detail = strip_trailing_newlines(result.err);
        return fail_step(std::move(out), ErrorKind::NonzeroExit,
                         "exit code " + std::to_string(result.exit_code) +
                             (detail.empty() ? "" : ": " + detail));
    }
    out.value = strip_trailing_newlines(result.out);
    return out;
}

std::string python_interpreter(const ExecContext& ctx) {
    auto it = ctx.env.find("NPCSH_PYTHON");
    if (it != ctx.env.end() && !it->second.empty()) return it->second;
    if (const char* env = std::getenv("NPCSH_PYTHON"); env && *env) return env;
    return "python3";
}

StepOutput run_python(StepOutput out, const std::string& body, ExecContext& ctx) {
    std::filesystem::path script =
        std::filesystem::temp_directory_path() /
        ("npcsh_step_" + std::to_string(::getpid()) + "_" +
         std::to_string(reinterpret_cast<uintptr_t>(&out)) + ".py");
    {
        std::ofstream file(script);
        if (!file) {
            return fail_step(std::move(out), ErrorKind::StepFailed,
                             "cannot write " + script.string());
        }
        file << body;
    }
    CommandResult result =
        run_argv({python_interpreter(ctx), script.string()}, command_options(ctx));
    std::error_code ec;
    std::filesystem::remove(script, ec);
    if (!result.timed_out && !result.cancelled && result.exit_code == 127) {
        out.duration_s = result.duration_s;
        out.stderr_text = result.err;
        return fail_step(std::move(out), ErrorKind::InterpreterNotFound,
                         "'" + python_interpreter(ctx) + "' is not runnable");
    }
    return finish_command(std::move(out), result);
}

Bindings render_step_args(const StepDef& step, const ExecContext& ctx) {
    Bindings args;
    for (const auto& [key, text] : step.args) {
        args[key] = render_template(text, ctx.bindings);
    }
    return args;
}

} // namespace

StepOutput execute_step(const StepDef& step, ExecContext& ctx) {
    StepOutput out;
    out.step_name = step.name;
    out.engine = step.engine;

    std::string body;
    try {
        body = render_template(step.body, ctx.bindings);
    } catch (const Error& e) {
        return fail_step(std::move(out), e.kind(), e.what());
    }

    if (step.engine == "sh" || step.engine == "bash") {
        return finish_command(std::move(out), run_shell(body, command_options(ctx)));
    }
    if (step.engine == "python") {
        return run_python(std::move(out), body, ctx);
    }
    if (step.engine == "llm") {
        if (!ctx.hooks.llm) {
            return fail_step(std::move(out), ErrorKind::ProviderError,
                             "no model attached for llm step '" + step.name + "'");
        }
        try {
            std::string reply = ctx.hooks.llm(body);
            out.value = reply;
            out.stdout_text = reply;
            return out;
        } catch (const Error& e) {
            return fail_step(std::move(out), e.kind(), e.what());
        }
    }
    if (step.engine == "agent") {
        if (!ctx.hooks.agent) {
            return fail_step(std::move(out), ErrorKind::ProviderError,
                             "no agent attached for step '" + step.name + "'");
        }
        try {
            std::string reply = ctx.hooks.agent(body);
            out.value = reply;
            out.stdout_text = reply;
            return out;
        } catch (const Error& e) {
            return fail_step(std::move(out), e.kind(), e.what());
        }
    }
    if (step.engine == "static") {
        out.value = body;
        return out;
    }

    // Jinx-as-engine: expand the named Jinx in place.
    const JinxDef* target = ctx.resolve ? ctx.resolve(step.engine) : nullptr;
    if (!target) target = find_builtin_jinx(step.engine);
    if (!target) {
        return fail_step(std::move(out), ErrorKind::UnknownJinx,
                         "step '" + step.name + "' names unknown engine '" + step.engine + "'");
    }

    Bindings sub_args;
    try {
        sub_args = render_step_args(step, ctx);
    } catch (const Error& e) {
        return fail_step(std::move(out), e.kind(), e.what());
    }

    ctx.depth += 1;
    if (ctx.depth > ctx.max_depth) {
        ctx.depth -= 1;
        return fail_step(std::move(out), ErrorKind::DepthExceeded,
                         "expansion deeper than " + std::to_string(ctx.max_depth));
    }
    Bindings saved = std::move(ctx.bindings);
    JinxResult sub;
    std::optional<Error> arg_error;
    try {
        sub = execute_jinx(*target, sub_args, ctx);
    } catch (const Error& e) {
        arg_error = e;
    }
    ctx.bindings = std::move(saved);
    ctx.depth -= 1;

    if (arg_error) return fail_step(std::move(out), arg_error->kind(), arg_error->what());
    for (const auto& sub_step : sub.outputs) out.duration_s += sub_step.duration_s;
    if (!sub.ok) {
        out.exit_code = 1;
        return fail_step(std::move(out), sub.error.value_or(ErrorKind::StepFailed),
                         "'" + target->name + "': " + sub.error_message);
    }
    out.value = sub.final_value;
    out.stdout_text = value_to_text(sub.final_value);
    return out;
}

// ---------------------------------------------------------------------------
// Jinx execution
// ---------------------------------------------------------------------------

namespace {

Value bind_argument(const JinxDef& jinx, const InputDecl& input, const Value& given) {
    if (value_matches(input.type, given)) return given;
    if (auto coerced = coerce_value(input.type, given)) return *coerced;
    throw Error(ErrorKind::TypeMismatch,
                "input '" + input.name + "' of '" + jinx.name + "' expects " +
                    to_string(input.type) + ", got " + value_to_text(given));
}

} // namespace

JinxResult execute_jinx(const JinxDef& jinx, const Bindings& args, ExecContext& ctx) {
    for (const auto& [key, _] : args) {
        if (!jinx.find_input(key)) {
            throw Error(ErrorKind::BadArgs,
                        "'" + jinx.name + "' does not declare input '" + key + "'");
        }
    }

    Bindings bound;
    for (const auto& input : jinx.inputs) {
        auto it = args.find(input.name);
        if (it != args.end()) {
            bound[input.name] = bind_argument(jinx, input, it->second);
        } else if (input.default_value) {
            bound[input.name] = *input.default_value;
        } else {
            throw Error(ErrorKind::MissingInput,
                        "'" + jinx.name + "' requires input '" + input.name + "'");
        }
    }

    JinxResult result;
    result.jinx_name = jinx.name;
    ctx.bindings = std::move(bound);

    for (const auto& step : jinx.steps) {
        if (ctx.budget <= 0) {
            result.error = ErrorKind::BudgetExhausted;
            result.error_message = "step budget exhausted before '" + step.name + "'";
            return result;
        }
        ctx.budget -= 1;

        StepOutput out = execute_step(step, ctx);
        bool step_ok = out.ok;
        if (step_ok && ctx.bindings.count(step.name)) {
            out = fail_step(std::move(out), ErrorKind::DuplicateName,
                            "step '" + step.name + "' would overwrite an existing binding");
            step_ok = false;
        }
        if (step_ok) ctx.bindings[step.name] = out.value;
        result.outputs.push_back(std::move(out));

        if (!step_ok) {
            const StepOutput& failed = result.outputs.back();
            result.error = ErrorKind::StepFailed;
            result.error_message = "step '" + step.name + "' failed: " +
                                   std::string(to_string(failed.error.value_or(
                                       ErrorKind::StepFailed))) +
                                   ": " + failed.error_message;
            return result;
        }
        result.final_value = result.outputs.back().value;
    }

    result.ok = true;
    return result;
}

} // namespace npcsh

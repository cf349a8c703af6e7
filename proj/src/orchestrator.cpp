#include "npcsh/orchestrator.hpp"

#include <algorithm>
#include <cctype>

#include "npcsh/builtins.hpp"
#include "npcsh/error.hpp"

namespace npcsh {

namespace {

using Clock = std::chrono::steady_clock;

std::string first_line(const std::string& text) {
    size_t nl = text.find('\n');
    return nl == std::string::npos ? text : text.substr(0, nl);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool deadline_passed(const AgentLimits& limits) {
    // A turn started with only a sliver of budget cannot finish, and a step
    // whose timeout was clamped to the deadline reports back a few
    // milliseconds early; treat a near-expired deadline as spent.
    static constexpr auto kMinTurnBudget = std::chrono::milliseconds(50);
    return limits.deadline && Clock::now() + kMinTurnBudget >= *limits.deadline;
}

// Remaining per-step budget given both the configured step timeout and the
// loop deadline; whichever is tighter wins.
std::chrono::milliseconds remaining_step_timeout(const AgentLimits& limits) {
    auto timeout = limits.step_timeout;
    if (limits.deadline) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*limits.deadline -
                                                                          Clock::now());
        if (left.count() < 1) left = std::chrono::milliseconds(1);
        if (timeout.count() == 0 || left < timeout) timeout = left;
    }
    return timeout;
}

class TraceRecorder {
public:
    explicit TraceRecorder(std::vector<TraceEvent>* sink)
        : sink_(sink), started_(Clock::now()) {}

    void add(std::string type, Value data) {
        if (!sink_) return;
        double t = std::chrono::duration<double>(Clock::now() - started_).count();
        sink_->push_back({std::move(type), std::move(data), t});
    }

private:
    std::vector<TraceEvent>* sink_;
    Clock::time_point started_;
};

} // namespace

// ---------------------------------------------------------------------------
// Model selection
// ---------------------------------------------------------------------------

std::string effective_model(const NpcDef& npc, const Team& team, const AgentEnv& env) {
    if (!npc.model.empty()) return npc.model;
    for (const Team* t = &team; t; t = t->parent) {
        if (!t->context.default_model.empty()) return t->context.default_model;
    }
    return env.model;
}

// ---------------------------------------------------------------------------
// Tool invocation (shared by slash commands and the agent loop)
// ---------------------------------------------------------------------------

namespace {

bool is_delegation_jinx(const JinxDef& jinx) {
    return jinx.name == "delegate" && jinx.find_input("target") && jinx.find_input("request");
}

ExecContext make_exec_context(const Team& team, AgentEnv& env, const AgentLimits& limits) {
    ExecContext ctx;
    ctx.workdir = env.workdir;
    for (const Team* t = &team; t; t = t->parent) {
        for (const auto& [k, v] : t->context.env) ctx.env.emplace(k, v);  // nearest wins
    }
    for (const auto& [k, v] : env.env) ctx.env[k] = v;
    ctx.step_timeout = remaining_step_timeout(limits);
    ctx.cancel = env.cancel;
    ctx.resolve = [&team](const std::string& name) { return try_resolve_jinx(name, team); };

    ChatClient* client = env.client;
    std::string model;
    for (const Team* t = &team; t && model.empty(); t = t->parent) {
        model = t->context.default_model;
    }
    if (model.empty()) model = env.model;
    ctx.hooks.llm = [client, model](const std::string& prompt) -> std::string {
        if (!client) {
            throw Error(ErrorKind::ProviderError, "no model attached");
        }
        std::vector<ChatMessage> messages{ChatMessage::make_user(prompt)};
        return client->complete(messages, {}, model).text;
    };
    // Engine `agent` outside an explicit delegation asks the team itself.
    Team const* team_ptr = &team;
    AgentEnv* env_ptr = &env;
    AgentLimits hook_limits = limits;
    ctx.hooks.agent = [team_ptr, env_ptr, hook_limits](const std::string& request) {
        if (env_ptr->agent_depth + 1 > hook_limits.max_agent_depth) {
            throw Error(ErrorKind::DepthExceeded, "agent nesting deeper than " +
                                                      std::to_string(hook_limits.max_agent_depth));
        }
        const NpcDef* orch = team_ptr->find_npc(team_ptr->context.orchestrator);
        if (!orch) {
            throw Error(ErrorKind::UnresolvedOrchestrator,
                        "team has no orchestrator to take the request");
        }
        AgentEnv nested = *env_ptr;
        nested.agent_depth += 1;
        AgentReply reply = agent_loop(*orch, request, *team_ptr, nested, hook_limits);
        return reply.text;
    };
    return ctx;
}

JinxResult run_delegation_jinx(const JinxDef& jinx, const Bindings& args, const Team& team,
                               AgentEnv& env, const AgentLimits& limits,
                               std::vector<TraceEvent>* trace) {
    DelegationSpec spec;
    auto target_it = args.find("target");
    auto request_it = args.find("request");
    if (target_it == args.end() || request_it == args.end()) {
        throw Error(ErrorKind::MissingInput,
                    "'" + jinx.name + "' requires both 'target' and 'request'");
    }
    spec.target = value_to_text(target_it->second);
    spec.task = value_to_text(request_it->second);
    if (auto it = args.find("criteria"); it != args.end()) {
        spec.completion_criteria = value_to_text(it->second);
    }
    if (auto it = args.find("max_iterations"); it != args.end() &&
                                               it->second.is_number_integer()) {
        spec.max_iterations = std::max(1, it->second.get<int>());
    }

    DelegationOutcome outcome = delegate(spec, team, env, limits);
    if (trace) {
        for (auto& event : outcome.trace) trace->push_back(std::move(event));
    }

    JinxResult result;
    result.jinx_name = jinx.name;
    result.ok = true;
    result.final_value = outcome.result;
    StepOutput summary;
    summary.step_name = "delegation";
    summary.engine = "agent";
    summary.value = Value{{"satisfied", outcome.satisfied},
                          {"iterations_used", outcome.iterations_used}};
    summary.stdout_text = outcome.result;
    result.outputs.push_back(std::move(summary));
    return result;
}

} // namespace

JinxResult invoke_tool(const JinxDef& jinx, const Bindings& args, const Team& team,
                       AgentEnv& env, const AgentLimits& limits,
                       std::vector<TraceEvent>* trace) {
    if (is_delegation_jinx(jinx)) {
        return run_delegation_jinx(jinx, args, team, env, limits, trace);
    }
    ExecContext ctx = make_exec_context(team, env, limits);
    return execute_jinx(jinx, args, ctx);
}

// ---------------------------------------------------------------------------
// Agent loop
// ---------------------------------------------------------------------------

namespace {

std::string system_prompt(const NpcDef& npc, const Catalog& catalog, bool native_tools) {
    std::string prompt = npc.directive;
    if (!native_tools && !catalog.tools.empty()) {
        prompt += "\n\n" + render_tools_prompt(catalog);
    }
    return prompt;
}

std::string catalog_listing(const Catalog& catalog) {
    std::string names;
    for (const auto& tool : catalog.tools) {
        if (!names.empty()) names += ", ";
        names += tool.name;
    }
    return names.empty() ? "(no tools)" : names;
}

} // namespace

AgentReply agent_loop(const NpcDef& npc, const std::string& user_message, const Team& team,
                      AgentEnv& env, const AgentLimits& limits,
                      const std::vector<ChatMessage>* history) {
    if (!env.client) throw Error(ErrorKind::ProviderError, "no chat client configured");

    Catalog catalog = build_catalog(npc, team);
    const std::string model = effective_model(npc, team, env);

    AgentReply reply;
    TraceRecorder trace(&reply.trace);

    if (history && !history->empty()) {
        reply.messages = *history;
    } else {
        reply.messages.push_back(
            ChatMessage::make_system(system_prompt(npc, catalog, env.native_tools)));
    }
    reply.messages.push_back(ChatMessage::make_user(user_message));

    std::string last_text;
    for (int turn = 0; turn < limits.turn_budget; ++turn) {
        if (deadline_passed(limits)) {
            reply.exhausted = true;
            reply.timed_out = true;
            trace.add("exhausted", Value{{"reason", "deadline"}});
            break;
        }

        ModelResponse response = env.client->complete(
            reply.messages, env.native_tools ? catalog.tools : std::vector<ToolSchema>{},
            model);
        reply.model_turns += 1;
        trace.add("model_turn",
                  Value{{"index", reply.model_turns},
                        {"text_chars", static_cast<long long>(response.text.size())},
                        {"native_calls", static_cast<long long>(response.native_calls.size())}});

        ParsedCall parsed =
            !response.native_calls.empty()
                ? parse_tool_call(response.native_calls.front().dump(), CallMode::native)
                : parse_tool_call(response.text, CallMode::prompted);
        for (const auto& warning : parsed.warnings) {
            trace.add("warning", Value{{"message", warning}});
        }

        if (parsed.kind == ParsedCall::Kind::none) {
            reply.text = response.text;
            reply.messages.push_back(ChatMessage::make_assistant(response.text));
            trace.add("reply", Value{{"text", response.text}});
            return reply;
        }

        reply.messages.push_back(ChatMessage::make_assistant(response.text));
        if (!response.text.empty()) last_text = response.text;

        if (parsed.kind == ParsedCall::Kind::malformed) {
            trace.add("malformed_call", Value{{"message", parsed.error}});
            std::string corrective =
                "Your tool call could not be parsed (" + parsed.error +
                "). Reply with exactly one ```tool_call block containing a JSON "
                "object with keys \"tool\" and \"arguments\", or answer in plain text.";
            reply.messages.push_back(ChatMessage::make_user(corrective));
            trace.add("corrective", Value{{"text", corrective}});
            continue;
        }

        const ToolCall& call = *parsed.call;
        ChatMessage& assistant = reply.messages.back();
        assistant.tool_call = call;

        AuthorizedCall authorized;
        try {
            authorized = enforce(call, catalog);
        } catch (const Error& e) {
            trace.add("rejected_call", Value{{"tool", call.tool},
                                             {"kind", to_string(e.kind())},
                                             {"message", e.what()}});
            std::string corrective = std::string(e.what()) +
                                     ". Available tools: " + catalog_listing(catalog) + ".";
            reply.messages.push_back(ChatMessage::make_user(corrective));
            trace.add("corrective", Value{{"text", corrective}});
            continue;
        }

        reply.tool_calls += 1;
        Value args_json = Value::object();
        for (const auto& [k, v] : authorized.arguments) args_json[k] = v;
        trace.add("tool_call", Value{{"tool", call.tool}, {"arguments", args_json}});

        JinxResult result;
        try {
            result = invoke_tool(*authorized.jinx, authorized.arguments, team, env, limits,
                                 &reply.trace);
        } catch (const Error& e) {
            result.jinx_name = authorized.jinx->name;
            result.error = e.kind();
            result.error_message = e.what();
        }

        for (const auto& step : result.outputs) {
            trace.add("step_result",
                      Value{{"step", step.step_name},
                            {"engine", step.engine},
                            {"ok", step.ok},
                            {"duration_s", step.duration_s}});
        }
        std::string tool_output =
            result.ok ? value_to_text(result.final_value)
                      : "error: " + (result.error_message.empty()
                                         ? std::string(to_string(
                                               result.error.value_or(ErrorKind::StepFailed)))
                                         : result.error_message);
        trace.add("tool_result",
                  Value{{"tool", call.tool}, {"ok", result.ok}, {"output", tool_output}});
        reply.messages.push_back(ChatMessage::make_tool_result(tool_output));
    }

    if (!reply.exhausted) {
        reply.exhausted = true;
        trace.add("exhausted", Value{{"reason", "turn_budget"}});
    }
    reply.text = last_text;
    return reply;
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

RoutingView routing_view(const Team& team) {
    RoutingView view;
    for (const auto& [name, npc] : team.npcs) {
        view.entries.push_back({name, first_line(npc.directive), RoutingEntry::Kind::npc});
    }
    for (const auto& [name, sub] : team.sub_teams) {
        view.entries.push_back(
            {name, sub->context.description, RoutingEntry::Kind::sub_team});
    }
    return view;
}

std::string serialize(const RoutingView& view) {
    std::string out;
    for (const auto& entry : view.entries) {
        out += "- " + entry.name +
               (entry.kind == RoutingEntry::Kind::sub_team ? " (team)" : "") + ": " +
               entry.description + "\n";
    }
    return out;
}

namespace {

JinxDef select_entry_jinx(const RoutingView& view) {
    JinxDef jinx;
    jinx.name = "select_entry";
    jinx.description = "Pick the entry best suited to handle the request.";
    std::string names;
    for (const auto& entry : view.entries) {
        if (!names.empty()) names += ", ";
        names += entry.name;
    }
    InputDecl name;
    name.name = "name";
    name.description = "One of: " + names;
    InputDecl rationale;
    rationale.name = "rationale";
    rationale.required = false;
    rationale.default_value = Value("");
    rationale.description = "Why this entry fits the request.";
    jinx.inputs = {std::move(name), std::move(rationale)};
    StepDef step;
    step.name = "selection";
    step.engine = "static";
    step.body = "{{ name }}";
    jinx.steps = {std::move(step)};
    return jinx;
}

} // namespace

RouteResult route(const std::string& request, const Team& team, AgentEnv& env,
                  const AgentLimits& limits) {
    const NpcDef* orchestrator = team.find_npc(team.context.orchestrator);
    if (!orchestrator) {
        throw Error(ErrorKind::UnresolvedOrchestrator,
                    "team '" + team.name() + "' has no orchestrator");
    }
    if (!env.client) throw Error(ErrorKind::ProviderError, "no chat client configured");

    RoutingView view = routing_view(team);
    if (view.entries.empty()) {
        return {orchestrator, &team, {}, "team has no entries", true};
    }

    Catalog catalog = build_catalog("router:" + orchestrator->name, {select_entry_jinx(view)});
    const std::string model = effective_model(*orchestrator, team, env);

    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage::make_system(
        orchestrator->directive +
        "\n\nYou are routing an incoming request. These are the entries you can "
        "hand it to:\n\n" +
        serialize(view) + "\n" + render_tools_prompt(catalog) +
        "\nCall select_entry with the single best entry name."));
    messages.push_back(ChatMessage::make_user(request));

    std::string rationale;
    // Initial ask plus two corrective rounds; then NoSelection fallback.
    for (int round = 0; round < 3; ++round) {
        ModelResponse response = env.client->complete(
            messages, env.native_tools ? catalog.tools : std::vector<ToolSchema>{}, model);
        ParsedCall parsed =
            !response.native_calls.empty()
                ? parse_tool_call(response.native_calls.front().dump(), CallMode::native)
                : parse_tool_call(response.text, CallMode::prompted);

        std::string selected;
        if (parsed.kind == ParsedCall::Kind::call) {
            try {
                AuthorizedCall authorized = enforce(*parsed.call, catalog);
                selected = value_to_text(authorized.arguments.at("name"));
                if (auto it = authorized.arguments.find("rationale");
                    it != authorized.arguments.end()) {
                    rationale = value_to_text(it->second);
                }
            } catch (const Error&) {
                selected.clear();
            }
        }

        auto entry = std::find_if(view.entries.begin(), view.entries.end(),
                                  [&](const RoutingEntry& e) { return e.name == selected; });
        if (entry != view.entries.end()) {
            if (entry->kind == RoutingEntry::Kind::npc) {
                RouteResult result{team.find_npc(entry->name), &team, {entry->name},
                                   rationale, false};
                return result;
            }
            const Team& sub = *team.sub_teams.at(entry->name);
            RouteResult inner = route(request, sub, env, limits);
            inner.path.insert(inner.path.begin(), entry->name);
            return inner;
        }

        messages.push_back(ChatMessage::make_assistant(response.text));
        messages.push_back(ChatMessage::make_user(
            "That is not a valid entry. Call select_entry with \"name\" set to one "
            "of the listed entries."));
    }

    return {orchestrator, &team, {}, "no valid selection; orchestrator answers directly",
            true};
}

// ---------------------------------------------------------------------------
// Delegation
// ---------------------------------------------------------------------------

namespace {

struct CheckVerdict {
    bool satisfied = false;
    std::string feedback;
};

CheckVerdict parse_verdict(const std::string& check_output) {
    std::string text = trim(check_output);
    std::string head = lower(text.substr(0, 11));
    if (head.rfind("satisfied", 0) == 0) return {true, ""};
    CheckVerdict verdict;
    if (head.rfind("unsatisfied", 0) == 0) {
        verdict.feedback = trim(text.substr(11));
    } else {
        verdict.feedback = text;  // checker ignored the format; pass it through
    }
    return verdict;
}

} // namespace

DelegationOutcome delegate(const DelegationSpec& spec, const Team& team, AgentEnv& env,
                           const AgentLimits& limits) {
    if (env.agent_depth + 1 > limits.max_agent_depth) {
        throw Error(ErrorKind::DepthExceeded,
                    "delegation nesting deeper than " + std::to_string(limits.max_agent_depth));
    }

    // Resolve the target: an NPC anywhere in the team tree, or a sub-team
    // (whose orchestrator takes the task).
    Team::NpcLocation target = team.find_npc_recursive(spec.target);
    if (!target.npc) {
        auto sub = team.sub_teams.find(spec.target);
        if (sub != team.sub_teams.end()) {
            target = {sub->second->find_npc(sub->second->context.orchestrator),
                      sub->second.get()};
        }
    }
    if (!target.npc) {
        throw Error(ErrorKind::UnknownTarget,
                    "'" + spec.target + "' is neither an NPC nor a sub-team of '" +
                        team.name() + "'");
    }

    const JinxDef& protocol = resolve_jinx("delegate", team);

    DelegationOutcome outcome;
    TraceRecorder trace(&outcome.trace);
    std::string feedback;

    for (int iteration = 1; iteration <= spec.max_iterations; ++iteration) {
        outcome.iterations_used = iteration;

        std::string request = spec.task;
        if (!feedback.empty()) {
            request += "\n\nFeedback on the previous attempt:\n" + feedback;
        }

        Bindings args;
        args["target"] = spec.target;
        args["request"] = request;
        if (!spec.completion_criteria.empty()) args["criteria"] = spec.completion_criteria;
        args["max_iterations"] = spec.max_iterations;

        // Engine env and checker model come from the delegating team; only
        // the attempt step is re-pointed at the resolved target.
        ExecContext ctx = make_exec_context(team, env, limits);
        const NpcDef* target_npc = target.npc;
        const Team* target_team = target.team;
        AgentEnv* env_ptr = &env;
        AgentLimits hook_limits = limits;
        ctx.hooks.agent = [target_npc, target_team, env_ptr,
                           hook_limits](const std::string& task_text) {
            AgentEnv nested = *env_ptr;
            nested.agent_depth += 1;
            AgentReply reply =
                agent_loop(*target_npc, task_text, *target_team, nested, hook_limits);
            return reply.text;
        };

        JinxResult round = execute_jinx(protocol, args, ctx);
        trace.add("delegation_round",
                  Value{{"iteration", iteration},
                        {"target", spec.target},
                        {"ok", round.ok}});
        if (!round.ok) {
            outcome.result = "delegation failed: " + round.error_message;
            return outcome;
        }

        std::string attempt_text;
        for (const auto& step : round.outputs) {
            if (step.step_name == "attempt") attempt_text = value_to_text(step.value);
        }
        outcome.result = attempt_text;

        CheckVerdict verdict = parse_verdict(value_to_text(round.final_value));
        trace.add("delegation_check", Value{{"iteration", iteration},
                                            {"satisfied", verdict.satisfied},
                                            {"feedback", verdict.feedback}});
        if (verdict.satisfied) {
            outcome.satisfied = true;
            return outcome;
        }
        feedback = verdict.feedback;
        if (spec.feedback_mode == DelegationSpec::FeedbackMode::verbatim &&
            !attempt_text.empty()) {
            feedback += "\n\nThe previous response was:\n" + attempt_text;
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Skills
// ---------------------------------------------------------------------------

bool is_skill(const JinxDef& jinx) {
    return jinx.steps.size() == 1 && jinx.steps[0].engine == "static";
}

namespace {

std::string normalize_heading(const std::string& text) {
    std::string out = trim(text);
    size_t hashes = 0;
    while (hashes < out.size() && out[hashes] == '#') ++hashes;
    return lower(trim(out.substr(hashes)));
}

struct SkillSection {
    std::string heading;  // as written, without '#' markers
    std::string body;
};

std::vector<SkillSection> skill_sections(const JinxDef& skill) {
    if (!is_skill(skill)) {
        throw Error(ErrorKind::UnknownSection,
                    "'" + skill.name + "' is not a skill (single static step expected)");
    }
    const std::string& content = skill.steps[0].body;
    std::vector<SkillSection> sections;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t nl = content.find('\n', pos);
        std::string line = content.substr(pos, nl == std::string::npos ? std::string::npos
                                                                       : nl - pos);
        if (!line.empty() && line[0] == '#') {
            size_t hashes = 0;
            while (hashes < line.size() && line[hashes] == '#') ++hashes;
            sections.push_back({trim(line.substr(hashes)), ""});
        } else if (!sections.empty()) {
            sections.back().body += line + "\n";
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    for (auto& section : sections) {
        section.body = trim(section.body);
    }
    return sections;
}

} // namespace

std::vector<std::string> skill_headings(const JinxDef& skill) {
    std::vector<std::string> out;
    for (const auto& section : skill_sections(skill)) out.push_back(section.heading);
    return out;
}

std::string retrieve_skill_section(const JinxDef& skill, const std::string& section) {
    std::vector<SkillSection> sections = skill_sections(skill);
    if (normalize_heading(section) == "toc") {
        std::string toc;
        for (const auto& s : sections) toc += s.heading + "\n";
        return trim(toc);
    }
    for (const auto& s : sections) {
        if (normalize_heading(s.heading) == normalize_heading(section)) return s.body;
    }
    std::string known;
    for (const auto& s : sections) {
        if (!known.empty()) known += ", ";
        known += s.heading;
    }
    throw Error(ErrorKind::UnknownSection,
                "no section '" + section + "' in '" + skill.name + "'; sections: " + known);
}

} // namespace npcsh

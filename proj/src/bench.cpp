#include "npcsh/bench.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "npcsh/error.hpp"
#include "npcsh/orchestrator.hpp"
#include "npcsh/shell.hpp"
#include "npcsh/subprocess.hpp"

namespace npcsh {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Suite loading
// ---------------------------------------------------------------------------

std::vector<BenchTask> load_suite(const fs::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::MalformedSuite, path.string() + ": " + e.what());
    }
    const YAML::Node tasks = root.IsMap() ? root["tasks"] : root;
    if (!tasks || !tasks.IsSequence() || tasks.size() == 0) {
        throw Error(ErrorKind::MalformedSuite,
                    path.string() + ": expected a non-empty 'tasks' list");
    }

    std::vector<BenchTask> out;
    std::set<std::string> ids;
    for (const auto& node : tasks) {
        if (!node.IsMap()) {
            throw Error(ErrorKind::MalformedSuite, path.string() + ": task must be a map");
        }
        BenchTask task;
        for (const auto& kv : node) {
            std::string key = kv.first.as<std::string>();
            if (key != "id" && key != "category" && key != "instruction" &&
                key != "verify_cmd" && key != "setup_cmd" && key != "timeout" &&
                key != "script") {
                throw Error(ErrorKind::MalformedSuite,
                            path.string() + ": unknown task key '" + key + "'");
            }
        }
        auto scalar = [&](const char* key) -> std::string {
            const YAML::Node field = node[key];
            return (field && !field.IsNull()) ? field.as<std::string>() : "";
        };
        task.id = scalar("id");
        task.category = scalar("category");
        task.instruction = scalar("instruction");
        task.verify_cmd = scalar("verify_cmd");
        task.setup_cmd = scalar("setup_cmd");
        if (const YAML::Node t = node["timeout"]; t && !t.IsNull()) {
            task.timeout_s = t.as<double>();
        }
        if (const YAML::Node script = node["script"]; script && !script.IsNull()) {
            for (const auto& attempt : script) {
                std::vector<std::string> turns;
                if (attempt.IsSequence()) {
                    for (const auto& turn : attempt) turns.push_back(turn.as<std::string>());
                } else {
                    turns.push_back(attempt.as<std::string>());
                }
                task.script.push_back(std::move(turns));
            }
        }
        if (task.id.empty() || task.instruction.empty() || task.verify_cmd.empty()) {
            throw Error(ErrorKind::MalformedSuite,
                        path.string() + ": task needs id, instruction and verify_cmd");
        }
        if (!ids.insert(task.id).second) {
            throw Error(ErrorKind::DuplicateTaskId,
                        path.string() + ": task id '" + task.id + "' appears twice");
        }
        out.push_back(std::move(task));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFeedbackPreamble =
    "Your previous attempt did not pass verification. Review the feedback "
    "below, fix the problem, and try again.\n\n";
constexpr size_t kFeedbackTailChars = 2000;
constexpr auto kVerifyTimeout = std::chrono::milliseconds(1900);

// In-process agent: the bundled team driven by agent_loop.
class InProcessSession : public AgentSession {
public:
    InProcessSession(const BenchTask& task, fs::path workdir, const BenchConfig& cfg,
                     std::shared_ptr<ChatClient> client)
        : task_(task), workdir_(std::move(workdir)), cfg_(cfg),
          client_(std::move(client)), team_(default_team()) {}

    Turn send(const std::string& instruction, std::chrono::milliseconds budget) override {
        attempt_ += 1;
        Turn turn;

        ChatClient* client = client_.get();
        std::unique_ptr<ScriptedClient> scripted;
        if (cfg_.provider == "scripted") {
            scripted = scripted_for_attempt();
            client = scripted.get();
        }
        if (!client) {
            turn.errored = true;
            turn.error = "no chat client";
            return turn;
        }

        AgentEnv env;
        env.client = client;
        env.model = cfg_.model;
        env.workdir = workdir_;
        AgentLimits limits;
        if (budget.count() > 0) limits.deadline = Clock::now() + budget;

        const NpcDef* npc = team_->find_npc(team_->context.orchestrator);
        try {
            AgentReply reply =
                agent_loop(*npc, instruction, *team_, env, limits, &messages_);
            messages_ = std::move(reply.messages);
            turn.tool_calls = reply.tool_calls;
            turn.model_turns = reply.model_turns;
            turn.timed_out = reply.timed_out;
            turn.transcript = transcript_of(reply.trace);
        } catch (const Error& e) {
            turn.errored = true;
            turn.error = e.what();
            turn.transcript = std::string("agent error: ") + e.what();
        }
        return turn;
    }

    void reset() override { messages_.clear(); }

private:
    std::unique_ptr<ScriptedClient> scripted_for_attempt() {
        auto client = std::make_unique<ScriptedClient>();
        if (!task_.script.empty()) {
            size_t index = std::min<size_t>(attempt_ - 1, task_.script.size() - 1);
            for (const auto& text : task_.script[index]) client->push_text(text);
        }
        return client;
    }

    static std::string transcript_of(const std::vector<TraceEvent>& trace) {
        std::string out;
        for (const auto& event : trace) {
            if (event.type == "reply") {
                out += event.data.value("text", std::string()) + "\n";
            } else if (event.type == "tool_call") {
                out += "[tool] " + event.data.value("tool", std::string()) + " " +
                       event.data.value("arguments", Value::object()).dump() + "\n";
            } else if (event.type == "tool_result") {
                out += event.data.value("output", std::string()) + "\n";
            } else if (event.type == "rejected_call" || event.type == "malformed_call") {
                out += "[" + event.type + "] " +
                       event.data.value("message", std::string()) + "\n";
            }
        }
        return out;
    }

    BenchTask task_;
    fs::path workdir_;
    const BenchConfig& cfg_;
    std::shared_ptr<ChatClient> client_;
    std::unique_ptr<Team> team_;
    std::vector<ChatMessage> messages_;
    int attempt_ = 0;
};

// Framework-agnostic agent: any command that reads the instruction and acts
// on the workdir. Feedback arrives the same way on retries.
class ExternalSession : public AgentSession {
public:
    ExternalSession(std::string cmd, fs::path workdir)
        : cmd_(std::move(cmd)), workdir_(std::move(workdir)) {}

    Turn send(const std::string& instruction, std::chrono::milliseconds budget) override {
        CommandOptions opts;
        opts.workdir = workdir_;
        opts.timeout = budget;
        opts.stdin_data = instruction;
        opts.env["NPCSH_INSTRUCTION"] = instruction;
        CommandResult result = run_shell(cmd_, opts);
        Turn turn;
        turn.transcript = result.out + result.err;
        turn.timed_out = result.timed_out;
        turn.errored = !result.timed_out && result.exit_code != 0;
        if (turn.errored) turn.error = "agent command exited " + std::to_string(result.exit_code);
        return turn;
    }

    void reset() override {}

private:
    std::string cmd_;
    fs::path workdir_;
};

} // namespace

SessionFactory make_session_factory(const BenchConfig& cfg,
                                    std::shared_ptr<ChatClient> client_override,
                                    std::string external_cmd) {
    if (!external_cmd.empty()) {
        return [external_cmd](const BenchTask&, const fs::path& workdir) {
            return std::make_unique<ExternalSession>(external_cmd, workdir);
        };
    }
    std::shared_ptr<ChatClient> client = client_override;
    if (!client && cfg.provider != "scripted") {
        client = std::make_shared<HttpChatClient>(resolve_provider(cfg.provider));
    }
    return [cfg, client](const BenchTask& task, const fs::path& workdir)
               -> std::unique_ptr<AgentSession> {
        return std::make_unique<InProcessSession>(task, workdir, cfg, client);
    };
}

// ---------------------------------------------------------------------------
// Task execution
// ---------------------------------------------------------------------------

namespace {

std::string tail(const std::string& text, size_t max_chars) {
    return text.size() <= max_chars ? text : text.substr(text.size() - max_chars);
}

fs::path make_workdir(const fs::path& root, const std::string& task_id) {
    fs::path dir = root / task_id;
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TaskResult run_task(const BenchTask& task, const SessionFactory& factory,
                    const BenchConfig& cfg) {
    TaskResult result;
    result.task_id = task.id;
    result.category = task.category;
    result.model = cfg.model;
    result.provider = cfg.provider;

    fs::path workdir;
    try {
        workdir = make_workdir(cfg.work_root.empty() ? fs::temp_directory_path() / "npcsh-bench"
                                                     : cfg.work_root,
                               task.id);
    } catch (const std::exception& e) {
        result.error = std::string("HarnessError: ") + e.what();
        return result;
    }

    if (!task.setup_cmd.empty()) {
        CommandOptions opts;
        opts.workdir = workdir;
        opts.timeout = std::chrono::milliseconds(60000);
        CommandResult setup = run_shell(task.setup_cmd, opts);
        if (!setup.ok()) {
            result.error = "SetupFailed: exit " + std::to_string(setup.exit_code) + ": " +
                           tail(setup.err, 300);
            return result;
        }
    }

    std::unique_ptr<AgentSession> session;
    try {
        session = factory(task, workdir);
    } catch (const std::exception& e) {
        result.error = std::string("HarnessError: ") + e.what();
        return result;
    }

    const double task_timeout = task.timeout_s > 0 ? task.timeout_s : cfg.timeout_s;
    const auto whole_deadline =
        Clock::now() + std::chrono::duration<double>(task_timeout);
    std::string feedback;

    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        AttemptTrace trace;
        trace.attempt_index = attempt;

        std::string instruction = task.instruction;
        if (!feedback.empty()) instruction += "\n\n" + feedback;

        auto budget = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::duration<double>(task_timeout));
        if (cfg.whole_task_budget) {
            budget = std::chrono::duration_cast<std::chrono::milliseconds>(whole_deadline -
                                                                           Clock::now());
            if (budget.count() <= 0) break;  // whole-task budget spent
        }

        auto started = Clock::now();
        AgentSession::Turn turn = session->send(instruction, budget);

        CommandOptions verify_opts;
        verify_opts.workdir = workdir;
        verify_opts.timeout = kVerifyTimeout;
        CommandResult verify = run_shell(task.verify_cmd, verify_opts);

        trace.duration_s = std::chrono::duration<double>(Clock::now() - started).count();
        trace.tool_calls = turn.tool_calls;
        trace.model_turns = turn.model_turns;

        if (verify.exit_code == 0 && !verify.timed_out) {
            trace.outcome = "pass";
            result.attempts.push_back(std::move(trace));
            result.passed = true;
            result.first_attempt_pass = attempt == 1;
            break;
        }
        trace.outcome = turn.timed_out ? "timeout" : (turn.errored ? "error" : "fail");

        if (attempt < cfg.max_attempts) {
            std::string verify_note = "verification command: " + task.verify_cmd +
                                      "\nverification exit code: " +
                                      std::to_string(verify.exit_code) + "\n" + verify.out +
                                      verify.err;
            feedback = kFeedbackPreamble +
                       tail(turn.transcript + "\n" + verify_note, kFeedbackTailChars);
            trace.feedback_given = feedback;
            if (cfg.fresh_context) session->reset();
        }
        result.attempts.push_back(std::move(trace));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Suite execution
// ---------------------------------------------------------------------------

SuiteSummary summarize_results(const std::vector<TaskResult>& results) {
    SuiteSummary summary;
    for (const auto& result : results) {
        summary.total += 1;
        auto& [passed, total] = summary.per_category[result.category];
        total += 1;
        if (result.passed) {
            summary.passed += 1;
            passed += 1;
        }
    }
    return summary;
}

std::string render_suite_summary(const SuiteSummary& summary) {
    std::string out = "passed " + std::to_string(summary.passed) + "/" +
                      std::to_string(summary.total) + "\n";
    for (const auto& [category, tally] : summary.per_category) {
        out += "  " + category + ": " + std::to_string(tally.first) + "/" +
               std::to_string(tally.second) + "\n";
    }
    return out;
}

SuiteRun run_suite(const std::vector<BenchTask>& tasks, const SessionFactory& factory,
                   const BenchConfig& cfg) {
    SuiteRun run;
    run.results.resize(tasks.size());

    std::ofstream log;
    std::mutex log_mutex;
    if (!cfg.trace_path.empty()) {
        log.open(cfg.trace_path, std::ios::trunc);
        if (!log) {
            throw Error(ErrorKind::HarnessError,
                        "cannot write trace log " + cfg.trace_path.string());
        }
    }
    auto record = [&](const TaskResult& result) {
        if (!log.is_open()) return;
        std::lock_guard lock(log_mutex);
        log << task_result_to_json(result).dump() << "\n";
        log.flush();
    };

    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        for (size_t i = 0; i < tasks.size(); ++i) {
            run.results[i] = run_task(tasks[i], factory, cfg);
            record(run.results[i]);
        }
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                run.results[i] = run_task(tasks[i], factory, cfg);
                record(run.results[i]);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }

    run.summary = summarize_results(run.results);
    return run;
}

// ---------------------------------------------------------------------------
// Trace log
// ---------------------------------------------------------------------------

Value task_result_to_json(const TaskResult& result) {
    Value record = Value::object();
    record["schema"] = kTraceSchemaVersion;
    record["task_id"] = result.task_id;
    record["category"] = result.category;
    record["model"] = result.model;
    record["provider"] = result.provider;
    record["passed"] = result.passed;
    record["first_attempt_pass"] = result.first_attempt_pass;
    if (!result.error.empty()) record["error"] = result.error;
    Value attempts = Value::array();
    for (const auto& attempt : result.attempts) {
        Value a = Value::object();
        a["attempt_index"] = attempt.attempt_index;
        a["tool_calls"] = attempt.tool_calls;
        a["model_turns"] = attempt.model_turns;
        a["duration_s"] = attempt.duration_s;
        a["outcome"] = attempt.outcome;
        if (!attempt.feedback_given.empty()) a["feedback_given"] = attempt.feedback_given;
        attempts.push_back(std::move(a));
    }
    record["attempts"] = std::move(attempts);
    return record;
}

TaskResult task_result_from_json(const Value& record) {
    if (!record.is_object() || record.value("schema", 0) != kTraceSchemaVersion) {
        throw Error(ErrorKind::MalformedSuite,
                    "trace record is not schema version " +
                        std::to_string(kTraceSchemaVersion));
    }
    TaskResult result;
    result.task_id = record.value("task_id", std::string());
    result.category = record.value("category", std::string());
    result.model = record.value("model", std::string());
    result.provider = record.value("provider", std::string());
    result.passed = record.value("passed", false);
    result.first_attempt_pass = record.value("first_attempt_pass", false);
    result.error = record.value("error", std::string());
    for (const auto& a : record.value("attempts", Value::array())) {
        AttemptTrace attempt;
        attempt.attempt_index = a.value("attempt_index", 0);
        attempt.tool_calls = a.value("tool_calls", 0);
        attempt.model_turns = a.value("model_turns", 0);
        attempt.duration_s = a.value("duration_s", 0.0);
        attempt.outcome = a.value("outcome", std::string());
        attempt.feedback_given = a.value("feedback_given", std::string());
        result.attempts.push_back(std::move(attempt));
    }
    return result;
}

std::vector<TaskResult> read_trace_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MalformedSuite, "cannot read trace log " + path.string());
    }
    std::vector<TaskResult> results;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Value record = Value::parse(line, nullptr, false);
        if (record.is_discarded()) {
            throw Error(ErrorKind::MalformedSuite,
                        path.string() + ":" + std::to_string(line_no) + ": not JSON");
        }
        results.push_back(task_result_from_json(record));
    }
    return results;
}

std::string normalize_trace_log(const std::string& content, const std::string& work_root) {
    std::string normalized;
    size_t start = 0;
    while (start <= content.size()) {
        size_t nl = content.find('\n', start);
        std::string line = content.substr(
            start, nl == std::string::npos ? std::string::npos : nl - start);
        if (!line.empty()) {
            Value record = Value::parse(line, nullptr, false);
            if (!record.is_discarded() && record.is_object()) {
                if (record.contains("attempts")) {
                    for (auto& attempt : record["attempts"]) attempt["duration_s"] = 0.0;
                }
                std::string dumped = record.dump();
                if (!work_root.empty()) {
                    size_t pos = 0;
                    while ((pos = dumped.find(work_root, pos)) != std::string::npos) {
                        dumped.replace(pos, work_root.size(), "<WORKROOT>");
                        pos += 10;
                    }
                }
                normalized += dumped + "\n";
            } else {
                normalized += line + "\n";
            }
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return normalized;
}

} // namespace npcsh

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "npcsh/llm_gateway.hpp"
#include "npcsh/value.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Tasks and results
// ---------------------------------------------------------------------------

struct BenchTask {
    std::string id;
    std::string category;
    std::string instruction;
    std::string verify_cmd;  // exit 0 = pass, run in the task workdir
    std::string setup_cmd;   // optional, run once before attempt 1
    double timeout_s = 0.0;  // 0 = use the run config's timeout

    // Canned model outputs for deterministic runs (provider "scripted"):
    // one list per attempt; attempts beyond the last list repeat it.
    std::vector<std::vector<std::string>> script;
};

struct AttemptTrace {
    int attempt_index = 0;  // 1-based
    int tool_calls = 0;     // enforcement-authorized calls
    int model_turns = 0;
    double duration_s = 0.0;
    std::string outcome;    // pass | fail | timeout | error
    std::string feedback_given;  // what the *next* attempt was told
};

struct TaskResult {
    std::string task_id;
    std::string category;
    std::string model;
    std::string provider;
    std::vector<AttemptTrace> attempts;
    bool passed = false;
    bool first_attempt_pass = false;
    std::string error;  // setup/harness failure note
};

// ---------------------------------------------------------------------------
// Agent sessions
// ---------------------------------------------------------------------------

// One conversation with an agent, scoped to one task. Attempts after the
// first continue the same conversation unless reset() intervenes
// (--fresh-context).
class AgentSession {
public:
    struct Turn {
        std::string transcript;
        int tool_calls = 0;
        int model_turns = 0;
        bool timed_out = false;
        bool errored = false;
        std::string error;
    };

    virtual ~AgentSession() = default;
    virtual Turn send(const std::string& instruction, std::chrono::milliseconds budget) = 0;
    virtual void reset() = 0;
};

using SessionFactory = std::function<std::unique_ptr<AgentSession>(
    const BenchTask& task, const std::filesystem::path& workdir)>;

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct BenchConfig {
    std::string model;
    std::string provider = "ollama";
    int max_attempts = 5;
    double timeout_s = 360.0;
    bool whole_task_budget = false;  // default: the timeout bounds each attempt
    bool fresh_context = false;      // default: attempts accumulate context
    int workers = 1;
    std::filesystem::path work_root;    // per-task dirs are created under this
    std::filesystem::path trace_path;   // empty = no trace log written
};

struct SuiteSummary {
    int passed = 0;
    int total = 0;
    std::map<std::string, std::pair<int, int>> per_category;  // passed, total
};

struct SuiteRun {
    std::vector<TaskResult> results;  // suite order
    SuiteSummary summary;
};

std::vector<BenchTask> load_suite(const std::filesystem::path& path);

TaskResult run_task(const BenchTask& task, const SessionFactory& factory,
                    const BenchConfig& cfg);

// Runs every task (parallel up to cfg.workers), appending one trace record
// per completed task to cfg.trace_path.
SuiteRun run_suite(const std::vector<BenchTask>& tasks, const SessionFactory& factory,
                   const BenchConfig& cfg);

SuiteSummary summarize_results(const std::vector<TaskResult>& results);
std::string render_suite_summary(const SuiteSummary& summary);

// The default agent: an in-process loop over the bundled team. With provider
// "scripted" each attempt replays the task's own script; otherwise
// `client_override` (tests) or a provider client drives it. An
// `external_cmd`, when set, replaces the in-process agent entirely: the
// command runs in the workdir with the instruction on stdin and
// NPCSH_INSTRUCTION exported, and its combined output is the transcript.
SessionFactory make_session_factory(const BenchConfig& cfg,
                                    std::shared_ptr<ChatClient> client_override = nullptr,
                                    std::string external_cmd = "");

// ---------------------------------------------------------------------------
// Trace log (line-delimited JSON, schema-versioned)
// ---------------------------------------------------------------------------

inline constexpr int kTraceSchemaVersion = 1;

Value task_result_to_json(const TaskResult& result);
TaskResult task_result_from_json(const Value& record);
std::vector<TaskResult> read_trace_log(const std::filesystem::path& path);

// Zeroes every duration and replaces `work_root` with a placeholder, so two
// runs of the same scripted suite compare bit-for-bit.
std::string normalize_trace_log(const std::string& content, const std::string& work_root);

} // namespace npcsh

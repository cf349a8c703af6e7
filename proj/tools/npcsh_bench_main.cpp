#include <iostream>

#include <CLI11.hpp>

#include "npcsh/analytics.hpp"
#include "npcsh/bench.hpp"
#include "npcsh/error.hpp"

namespace {

int cmd_run(const std::string& suite_path, npcsh::BenchConfig cfg,
            const std::string& agent_cmd) {
    std::vector<npcsh::BenchTask> tasks = npcsh::load_suite(suite_path);
    npcsh::SessionFactory factory = npcsh::make_session_factory(cfg, nullptr, agent_cmd);
    npcsh::SuiteRun run = npcsh::run_suite(tasks, factory, cfg);
    std::cout << npcsh::render_suite_summary(run.summary);
    if (!cfg.trace_path.empty()) {
        std::cout << "trace log: " << cfg.trace_path.string() << "\n";
    }
    return 0;
}

int cmd_report(const std::string& log_path, const std::string& external_path,
               bool by_category, bool correlations, const std::string& columns_dir) {
    std::vector<npcsh::TaskResult> results = npcsh::read_trace_log(log_path);
    std::vector<npcsh::ModelSummary> summaries = npcsh::summarize(results);
    std::cout << npcsh::render_summary_table(summaries);

    std::vector<npcsh::RetryGain> gains;
    if (by_category || !columns_dir.empty()) gains = npcsh::retry_gains(results);
    if (by_category) {
        std::cout << "\n" << npcsh::render_category_table(results);
    }

    std::map<std::string, double> external;
    std::vector<npcsh::CorrelationResult> predictor_results;
    if (correlations || !columns_dir.empty()) {
        if (!external_path.empty()) external = npcsh::load_external_scores(external_path);
        try {
            predictor_results = npcsh::predictors(
                summaries, external.empty() ? nullptr : &external);
        } catch (const npcsh::Error& e) {
            if (correlations) std::cout << "\ncorrelations: " << e.what() << "\n";
        }
    }
    if (correlations && !predictor_results.empty()) {
        std::cout << "\n" << npcsh::render_correlation_table(predictor_results);
    }

    if (!columns_dir.empty()) {
        npcsh::write_column_files(columns_dir, summaries, gains, predictor_results);
        std::cout << "\ncolumn files: " << columns_dir << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"npcsh-bench - run benchmark suites and report on trace logs"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute a benchmark suite");
    std::string suite_path;
    std::string agent_cmd;
    npcsh::BenchConfig cfg;
    std::string work_root, trace_path = "npcsh_bench_trace.jsonl";
    run->add_option("suite", suite_path, "Suite file")->required();
    run->add_option("--model", cfg.model, "Model id recorded in traces and used by the agent");
    run->add_option("--provider", cfg.provider,
                    "Provider id; 'scripted' replays the suite's canned outputs");
    run->add_option("--max-attempts", cfg.max_attempts, "Retry ceiling per task (default 5)");
    run->add_option("--timeout", cfg.timeout_s, "Seconds per attempt (default 360)");
    run->add_option("--workers", cfg.workers, "Parallel task workers (default 1)");
    run->add_flag("--fresh-context", cfg.fresh_context,
                  "Reset the conversation between attempts instead of accumulating");
    run->add_flag("--whole-task-budget", cfg.whole_task_budget,
                  "Make --timeout bound the whole task instead of each attempt");
    run->add_option("--agent-cmd", agent_cmd,
                    "External agent command (reads the instruction on stdin, acts in the "
                    "task workdir)");
    run->add_option("--work-root", work_root, "Directory for per-task workdirs");
    run->add_option("--trace", trace_path, "Trace log path (empty = no log)");

    // report
    auto* report = app.add_subcommand("report", "Summarize a trace log");
    std::string log_path, external_path, columns_dir;
    bool by_category = false, correlations = false;
    report->add_option("trace-log", log_path, "Line-delimited trace log")->required();
    report->add_option("--external-scores", external_path,
                       "Two-column 'model score' file to correlate against");
    report->add_flag("--by-category", by_category, "Per-category rates and retry gains");
    report->add_flag("--correlations", correlations, "Predictor correlations vs score");
    report->add_option("--columns", columns_dir, "Write machine-readable TSVs here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            cfg.work_root = work_root;
            cfg.trace_path = trace_path;
            return cmd_run(suite_path, cfg, agent_cmd);
        }
        return cmd_report(log_path, external_path, by_category, correlations, columns_dir);
    } catch (const npcsh::Error& e) {
        std::cerr << "npcsh-bench: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "npcsh-bench: " << e.what() << "\n";
        return 1;
    }
}

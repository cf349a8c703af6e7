#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npcsh/bench.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Per-model summaries
// ---------------------------------------------------------------------------

struct ModelSummary {
    std::string model;
    int score = 0;  // passed tasks
    int total = 0;
    double pass_rate = 0.0;
    double mean_tool_calls = 0.0;  // per task, all attempts
    double mean_duration = 0.0;    // seconds per task, all attempts
    double mean_attempts = 0.0;
    double first_attempt_rate = 0.0;       // first-attempt passes / total tasks
    double first_attempt_of_passes = 0.0;  // first-attempt passes / passed tasks
    double mean_tool_calls_success = 0.0;  // per passed task
    double mean_tool_calls_failure = 0.0;  // per failed task
    std::map<std::string, std::pair<int, int>> per_category;  // passed, total
    std::string score_display;  // "k/total (p%)"
};

// Table-style "k/total (p%)" with the percentage rounded half-up.
std::string score_display(int passed, int total);

// One summary per model, sorted by model name. Throws EmptyInput.
std::vector<ModelSummary> summarize(const std::vector<TaskResult>& results);

// ---------------------------------------------------------------------------
// Retry gain
// ---------------------------------------------------------------------------

struct RetryGain {
    std::string category;
    double first_attempt_rate = 0.0;  // percent
    double final_rate = 0.0;          // percent
    double gain = 0.0;                // percentage points, exact from counts
};

RetryGain retry_gain(const std::vector<TaskResult>& results, const std::string& category);
std::vector<RetryGain> retry_gains(const std::vector<TaskResult>& results);

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

struct CorrelationResult {
    std::string x_metric;
    std::string y_metric;
    double r = 0.0;
    int n = 0;
    double p = 0.0;       // two-sided, t-distribution with n-2 dof; NaN when n < 3
    std::string error;    // nonempty when the pair could not be computed
};

// Pearson product-moment correlation. Throws LengthMismatch, ZeroVariance.
CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Score against each candidate predictor, ranked by |r| descending.
// Uncomputable pairs (zero variance) are kept with `error` set. Throws
// InsufficientModels when fewer than 3 models are present.
std::vector<CorrelationResult> predictors(
    const std::vector<ModelSummary>& summaries,
    const std::map<std::string, double>* external_scores = nullptr,
    const std::string& external_name = "external_score");

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

std::string render_summary_table(const std::vector<ModelSummary>& summaries);
std::string render_category_table(const std::vector<TaskResult>& results);
std::string render_correlation_table(const std::vector<CorrelationResult>& correlations);

// Two-column "model<TAB>score" file for the external-benchmark join.
std::map<std::string, double> load_external_scores(const std::filesystem::path& path);

// Machine-readable TSV column files (one per table) under `dir`.
void write_column_files(const std::filesystem::path& dir,
                        const std::vector<ModelSummary>& summaries,
                        const std::vector<RetryGain>& gains,
                        const std::vector<CorrelationResult>& correlations);

} // namespace npcsh

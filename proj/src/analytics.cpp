#include "npcsh/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "npcsh/error.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

std::string score_display(int passed, int total) {
    long long percent =
        total > 0 ? static_cast<long long>(std::floor(100.0 * passed / total + 0.5)) : 0;
    return std::to_string(passed) + "/" + std::to_string(total) + " (" +
           std::to_string(percent) + "%)";
}

namespace {

double task_tool_calls(const TaskResult& result) {
    double calls = 0;
    for (const auto& attempt : result.attempts) calls += attempt.tool_calls;
    return calls;
}

double task_duration(const TaskResult& result) {
    double seconds = 0;
    for (const auto& attempt : result.attempts) seconds += attempt.duration_s;
    return seconds;
}

} // namespace

std::vector<ModelSummary> summarize(const std::vector<TaskResult>& results) {
    if (results.empty()) throw Error(ErrorKind::EmptyInput, "no task results to summarize");

    std::map<std::string, std::vector<const TaskResult*>> by_model;
    for (const auto& result : results) by_model[result.model].push_back(&result);

    std::vector<ModelSummary> summaries;
    for (const auto& [model, group] : by_model) {
        ModelSummary s;
        s.model = model;
        s.total = static_cast<int>(group.size());

        double calls = 0, duration = 0, attempts = 0;
        double calls_success = 0, calls_failure = 0;
        int first_attempt_passes = 0, failures = 0;
        for (const TaskResult* task : group) {
            if (task->passed) s.score += 1;
            if (task->first_attempt_pass) first_attempt_passes += 1;
            double task_calls = task_tool_calls(*task);
            calls += task_calls;
            duration += task_duration(*task);
            attempts += static_cast<double>(task->attempts.size());
            if (task->passed) {
                calls_success += task_calls;
            } else {
                calls_failure += task_calls;
                failures += 1;
            }
            auto& [passed, total] = s.per_category[task->category];
            total += 1;
            if (task->passed) passed += 1;
        }

        s.pass_rate = static_cast<double>(s.score) / s.total;
        s.mean_tool_calls = calls / s.total;
        s.mean_duration = duration / s.total;
        s.mean_attempts = attempts / s.total;
        s.first_attempt_rate = static_cast<double>(first_attempt_passes) / s.total;
        s.first_attempt_of_passes =
            s.score > 0 ? static_cast<double>(first_attempt_passes) / s.score : 0.0;
        s.mean_tool_calls_success = s.score > 0 ? calls_success / s.score : 0.0;
        s.mean_tool_calls_failure = failures > 0 ? calls_failure / failures : 0.0;
        s.score_display = score_display(s.score, s.total);
        summaries.push_back(std::move(s));
    }
    return summaries;
}

// ---------------------------------------------------------------------------
// Retry gain
// ---------------------------------------------------------------------------

RetryGain retry_gain(const std::vector<TaskResult>& results, const std::string& category) {
    int total = 0, first_passes = 0, final_passes = 0;
    for (const auto& result : results) {
        if (result.category != category) continue;
        total += 1;
        if (result.first_attempt_pass) first_passes += 1;
        if (result.passed) final_passes += 1;
    }
    if (total == 0) {
        throw Error(ErrorKind::UnknownCategory,
                    "no tasks in category '" + category + "'");
    }
    RetryGain gain;
    gain.category = category;
    gain.first_attempt_rate = 100.0 * first_passes / total;
    gain.final_rate = 100.0 * final_passes / total;
    // From integer counts, so constructed fixtures come out exact.
    gain.gain = 100.0 * (final_passes - first_passes) / total;
    return gain;
}

std::vector<RetryGain> retry_gains(const std::vector<TaskResult>& results) {
    std::map<std::string, bool> categories;
    for (const auto& result : results) categories[result.category] = true;
    std::vector<RetryGain> gains;
    for (const auto& [category, _] : categories) {
        gains.push_back(retry_gain(results, category));
    }
    std::sort(gains.begin(), gains.end(),
              [](const RetryGain& a, const RetryGain& b) { return a.gain > b.gain; });
    return gains;
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw Error(ErrorKind::LengthMismatch,
                    std::to_string(xs.size()) + " xs vs " + std::to_string(ys.size()) + " ys");
    }
    const size_t n = xs.size();
    if (n < 2) throw Error(ErrorKind::LengthMismatch, "need at least 2 pairs");

    double mean_x = 0, mean_y = 0;
    for (size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(ErrorKind::ZeroVariance,
                    sxx == 0.0 ? "x values are all equal" : "y values are all equal");
    }

    CorrelationResult result;
    result.n = static_cast<int>(n);
    result.r = sxy / std::sqrt(sxx * syy);
    if (result.r > 1.0) result.r = 1.0;
    if (result.r < -1.0) result.r = -1.0;

    if (n < 3) {
        result.p = std::numeric_limits<double>::quiet_NaN();
        return result;
    }
    const double r2 = result.r * result.r;
    if (r2 >= 1.0) {
        result.p = 0.0;
        return result;
    }
    const double dof = static_cast<double>(n - 2);
    const double t = std::fabs(result.r) * std::sqrt(dof / (1.0 - r2));
    boost::math::students_t_distribution<double> dist(dof);
    result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    return result;
}

std::vector<CorrelationResult> predictors(const std::vector<ModelSummary>& summaries,
                                          const std::map<std::string, double>* external_scores,
                                          const std::string& external_name) {
    if (summaries.size() < 3) {
        throw Error(ErrorKind::InsufficientModels,
                    "need at least 3 models, got " + std::to_string(summaries.size()));
    }

    std::vector<double> score;
    for (const auto& s : summaries) score.push_back(s.pass_rate);

    auto against = [&](const std::string& name, const std::vector<double>& xs,
                       const std::vector<double>& ys) {
        CorrelationResult result;
        try {
            result = pearson(xs, ys);
        } catch (const Error& e) {
            result.n = static_cast<int>(xs.size());
            result.r = std::numeric_limits<double>::quiet_NaN();
            result.p = std::numeric_limits<double>::quiet_NaN();
            result.error = e.what();
        }
        result.x_metric = name;
        result.y_metric = "score";
        return result;
    };

    std::vector<CorrelationResult> out;
    {
        std::vector<double> xs;
        for (const auto& s : summaries) xs.push_back(s.mean_tool_calls);
        out.push_back(against("mean_tool_calls", xs, score));
    }
    {
        std::vector<double> xs;
        for (const auto& s : summaries) xs.push_back(s.mean_duration);
        out.push_back(against("mean_duration", xs, score));
    }
    {
        std::vector<double> xs;
        for (const auto& s : summaries) xs.push_back(s.mean_attempts);
        out.push_back(against("mean_attempts", xs, score));
    }
    if (external_scores) {
        std::vector<double> xs, ys;
        for (const auto& s : summaries) {
            auto it = external_scores->find(s.model);
            if (it != external_scores->end()) {
                xs.push_back(it->second);
                ys.push_back(s.pass_rate);
            }
        }
        if (xs.size() >= 2) {
            out.push_back(against(external_name, xs, ys));
        } else {
            CorrelationResult missing;
            missing.x_metric = external_name;
            missing.y_metric = "score";
            missing.n = static_cast<int>(xs.size());
            missing.r = std::numeric_limits<double>::quiet_NaN();
            missing.p = std::numeric_limits<double>::quiet_NaN();
            missing.error = "fewer than 2 models matched the external score file";
            out.push_back(std::move(missing));
        }
    }

    std::sort(out.begin(), out.end(), [](const CorrelationResult& a,
                                         const CorrelationResult& b) {
        const bool a_ok = std::isfinite(a.r), b_ok = std::isfinite(b.r);
        if (a_ok != b_ok) return a_ok;
        if (!a_ok) return a.x_metric < b.x_metric;
        return std::fabs(a.r) > std::fabs(b.r);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string pad(const std::string& text, size_t width) {
    return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

std::string fixed(double value, int places = 2) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", places, value);
    return buffer;
}

} // namespace

std::string render_summary_table(const std::vector<ModelSummary>& summaries) {
    size_t name_width = 5;
    for (const auto& s : summaries) name_width = std::max(name_width, s.model.size());

    std::string out = pad("model", name_width) +
                      "  score           first-att  of-passes  calls  calls+  calls-  "
                      "attempts  seconds\n";
    for (const auto& s : summaries) {
        out += pad(s.model, name_width) + "  " + pad(s.score_display, 15) + " " +
               pad(fixed(s.first_attempt_rate), 10) + " " +
               pad(fixed(s.first_attempt_of_passes), 10) + " " +
               pad(fixed(s.mean_tool_calls), 6) + " " +
               pad(fixed(s.mean_tool_calls_success), 7) + " " +
               pad(fixed(s.mean_tool_calls_failure), 7) + " " +
               pad(fixed(s.mean_attempts), 9) + " " + fixed(s.mean_duration) + "\n";
    }
    return out;
}

std::string render_category_table(const std::vector<TaskResult>& results) {
    std::vector<RetryGain> gains = retry_gains(results);
    size_t name_width = 8;
    for (const auto& gain : gains) name_width = std::max(name_width, gain.category.size());

    std::string out =
        pad("category", name_width) + "  first-attempt%  final%  retry-gain\n";
    for (const auto& gain : gains) {
        out += pad(gain.category, name_width) + "  " +
               pad(fixed(gain.first_attempt_rate, 1), 15) +
               pad(fixed(gain.final_rate, 1), 8) + fixed(gain.gain, 1) + "\n";
    }
    return out;
}

std::string render_correlation_table(const std::vector<CorrelationResult>& correlations) {
    std::string out = "predictor         vs score      r        p        n\n";
    for (const auto& c : correlations) {
        if (!c.error.empty()) {
            out += pad(c.x_metric, 18) + "(" + c.error + ")\n";
            continue;
        }
        out += pad(c.x_metric, 18) + pad("score", 12) + pad(fixed(c.r, 4), 9) +
               pad(fixed(c.p, 4), 9) + std::to_string(c.n) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::map<std::string, double> load_external_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MalformedDocument,
                    "cannot read external scores " + path.string());
    }
    std::map<std::string, double> scores;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string model;
        double score = 0;
        if (!(fields >> model >> score)) {
            throw Error(ErrorKind::MalformedDocument,
                        path.string() + ":" + std::to_string(line_no) +
                            ": expected 'model score'");
        }
        scores[model] = score;
    }
    return scores;
}

void write_column_files(const std::filesystem::path& dir,
                        const std::vector<ModelSummary>& summaries,
                        const std::vector<RetryGain>& gains,
                        const std::vector<CorrelationResult>& correlations) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "models.tsv");
        out << "model\tpassed\ttotal\tpass_rate\tfirst_attempt_rate\t"
               "first_attempt_of_passes\tmean_tool_calls\tmean_tool_calls_success\t"
               "mean_tool_calls_failure\tmean_attempts\tmean_duration_s\n";
        for (const auto& s : summaries) {
            out << s.model << '\t' << s.score << '\t' << s.total << '\t' << s.pass_rate
                << '\t' << s.first_attempt_rate << '\t' << s.first_attempt_of_passes << '\t'
                << s.mean_tool_calls << '\t' << s.mean_tool_calls_success << '\t'
                << s.mean_tool_calls_failure << '\t' << s.mean_attempts << '\t'
                << s.mean_duration << '\n';
        }
    }
    {
        std::ofstream out(dir / "categories.tsv");
        out << "category\tfirst_attempt_pct\tfinal_pct\tretry_gain_pts\n";
        for (const auto& gain : gains) {
            out << gain.category << '\t' << gain.first_attempt_rate << '\t'
                << gain.final_rate << '\t' << gain.gain << '\n';
        }
    }
    {
        std::ofstream out(dir / "correlations.tsv");
        out << "x_metric\ty_metric\tr\tp\tn\terror\n";
        for (const auto& c : correlations) {
            out << c.x_metric << '\t' << c.y_metric << '\t' << c.r << '\t' << c.p << '\t'
                << c.n << '\t' << c.error << '\n';
        }
    }
}

} // namespace npcsh

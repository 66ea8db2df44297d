#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdmd/alarm_rules.hpp"
#include "qdmd/hankel_dmd.hpp"
#include "qdmd/run_record.hpp"

namespace qdmd {

struct RunScore {
  std::string run_id;
  RunLabel label;
  double score = 0.0;
  std::optional<AlarmEvent> alarm;
  std::optional<std::int64_t> lead;
};

// Residual trace of one run: (end_step, residual) per window, in window order.
std::vector<SignalPoint> residual_trace(std::span<const WindowDiagnostics> diags);

// Max of each run's trace. Throws ValidationError when a trace is empty.
std::vector<RunScore> score_runs(
    std::span<const RunRecord> runs, std::span<const RunLabel> labels,
    const std::map<std::string, std::vector<SignalPoint>>& traces);

// Trace of a named aux signal for every run; throws when a run lacks it.
std::map<std::string, std::vector<SignalPoint>> aux_traces(
    std::span<const RunRecord> runs, const std::string& signal);

// Early-generalization runs are excluded from every metric below.
double auroc(std::span<const RunScore> scores);
double auprc(std::span<const RunScore> scores);

struct OperatingPoint {
  int n_grok = 0;
  int n_non = 0;
  int fired_grok = 0;
  int fired_non = 0;
  int tp_before_onset = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::vector<std::int64_t> leads_tp;   // positive leads only
  std::vector<std::int64_t> leads_all;  // every fired grok run
  std::optional<double> median_lead_tp;
  std::optional<double> median_lead_all;
};

OperatingPoint operating_point(std::span<const RunScore> scores);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Clopper-Pearson interval for a binomial proportion.
Interval binom_interval(std::int64_t successes, std::int64_t trials, double level = 0.95);

enum class Statistic { auroc, auprc, median_lead_tp, median_lead_all };
const char* to_string(Statistic s);

// Stratified percentile bootstrap over runs.
Interval bootstrap_ci(std::span<const RunScore> scores, Statistic statistic,
                      int n_boot, std::uint64_t seed, double level = 0.95,
                      int threads = 1);

// Smallest threshold t such that the fraction of non-grokking runs with
// score >= t is at most target_fpr.
double fair_fpr_threshold(std::span<const RunScore> calibration, double target_fpr);

struct CalibrationRow {
  std::string group;
  std::size_t n_windows = 0;
  double mean_holdout_rr = 0.0;
  double mean_persistence_rr = 0.0;
  double mean_gain = 0.0;
};

std::vector<CalibrationRow> aggregate_calibration(
    const std::map<std::string, std::vector<WindowDiagnostics>>& groups);

double median(std::vector<double> values);

}  // namespace qdmd

#include "qdmd/detection_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>

#include "qdmd/errors.hpp"
#include "qdmd/parallel.hpp"
#include "qdmd/random.hpp"

namespace qdmd {

std::vector<SignalPoint> residual_trace(std::span<const WindowDiagnostics> diags) {
  std::vector<SignalPoint> trace;
  trace.reserve(diags.size());
  for (const auto& d : diags) trace.push_back({d.end_step, d.residual});
  return trace;
}

std::vector<RunScore> score_runs(
    std::span<const RunRecord> runs, std::span<const RunLabel> labels,
    const std::map<std::string, std::vector<SignalPoint>>& traces) {
  if (runs.size() != labels.size()) throw ValidationError("score_runs: label count mismatch");
  std::vector<RunScore> out;
  out.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto it = traces.find(runs[i].run_id);
    if (it == traces.end() || it->second.empty()) {
      throw ValidationError("score_runs: no signal values for run '" + runs[i].run_id + "'");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : it->second) best = std::max(best, p.value);
    out.push_back({runs[i].run_id, labels[i], best, std::nullopt, std::nullopt});
  }
  return out;
}

std::map<std::string, std::vector<SignalPoint>> aux_traces(std::span<const RunRecord> runs,
                                                           const std::string& signal) {
  std::map<std::string, std::vector<SignalPoint>> out;
  for (const auto& run : runs) {
    const auto it = run.aux_signals.find(signal);
    if (it == run.aux_signals.end() || it->second.empty()) {
      throw ValidationError("run '" + run.run_id + "' has no aux signal '" + signal + "'");
    }
    out[run.run_id] = it->second;
  }
  return out;
}

namespace {

void split_classes(std::span<const RunScore> scores, std::vector<double>& pos,
                   std::vector<double>& neg) {
  for (const auto& s : scores) {
    if (s.label.kind == RunKind::grok) pos.push_back(s.score);
    if (s.label.kind == RunKind::non_grok) neg.push_back(s.score);
  }
}

double auroc_of(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) {
    throw ValidationError("auroc: pool needs at least one grokking and one non-grokking run (" +
                          std::to_string(pos.size()) + " grok, " +
                          std::to_string(neg.size()) + " non-grok)");
  }
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) wins += 1.0;
      else if (p == n) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double auprc_of(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty()) throw ValidationError("auprc: pool has no grokking runs");
  std::vector<std::pair<double, bool>> ranked;
  for (double p : pos) ranked.emplace_back(p, true);
  for (double n : neg) ranked.emplace_back(n, false);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& x, const auto& y) { return x.first > y.first; });

  const double total_pos = static_cast<double>(pos.size());
  double tp = 0.0, fp = 0.0, ap = 0.0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    double block_pos = 0.0;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      (ranked[j].second ? block_pos : fp) += 1.0;
      ++j;
    }
    tp += block_pos;
    if (block_pos > 0.0) ap += (tp / (tp + fp)) * (block_pos / total_pos);
    i = j;
  }
  return ap;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double auroc(std::span<const RunScore> scores) {
  std::vector<double> pos, neg;
  split_classes(scores, pos, neg);
  return auroc_of(pos, neg);
}

double auprc(std::span<const RunScore> scores) {
  std::vector<double> pos, neg;
  split_classes(scores, pos, neg);
  return auprc_of(pos, neg);
}

OperatingPoint operating_point(std::span<const RunScore> scores) {
  OperatingPoint op;
  for (const auto& s : scores) {
    const bool fired = s.alarm && s.alarm->fired;
    if (s.label.kind == RunKind::grok) {
      ++op.n_grok;
      if (!fired) continue;
      ++op.fired_grok;
      if (s.lead) {
        op.leads_all.push_back(*s.lead);
        if (*s.lead > 0) {
          ++op.tp_before_onset;
          op.leads_tp.push_back(*s.lead);
        }
      }
    } else if (s.label.kind == RunKind::non_grok) {
      ++op.n_non;
      if (fired) ++op.fired_non;
    }
  }
  op.tpr = op.n_grok > 0 ? static_cast<double>(op.fired_grok) / op.n_grok : 0.0;
  op.fpr = op.n_non > 0 ? static_cast<double>(op.fired_non) / op.n_non : 0.0;
  auto med = [](const std::vector<std::int64_t>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return median(std::vector<double>(v.begin(), v.end()));
  };
  op.median_lead_tp = med(op.leads_tp);
  op.median_lead_all = med(op.leads_all);
  return op;
}

namespace {

// Inverse of the regularized incomplete beta function by bisection.
double beta_quantile(double a, double b, double target) {
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (boost::math::ibeta(a, b, mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Interval binom_interval(std::int64_t successes, std::int64_t trials, double level) {
  if (trials < 1 || successes < 0 || successes > trials) {
    throw ValidationError("binom_interval: need 0 <= successes <= trials and trials >= 1 (got " +
                          std::to_string(successes) + "/" + std::to_string(trials) + ")");
  }
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("binom_interval: level in (0, 1)");
  const double alpha = 1.0 - level;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  Interval out{0.0, 1.0};
  if (successes > 0) out.lo = beta_quantile(k, n - k + 1.0, alpha / 2.0);
  if (successes < trials) out.hi = beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0);
  out.lo = std::clamp(out.lo, 0.0, 1.0);
  out.hi = std::clamp(out.hi, 0.0, 1.0);
  return out;
}

const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::auroc: return "auroc";
    case Statistic::auprc: return "auprc";
    case Statistic::median_lead_tp: return "median_lead_tp";
    case Statistic::median_lead_all: return "median_lead_all";
  }
  return "unknown";
}

Interval bootstrap_ci(std::span<const RunScore> scores, Statistic statistic, int n_boot,
                      std::uint64_t seed, double level, int threads) {
  if (n_boot < 1) throw ValidationError("bootstrap_ci: n_boot must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("bootstrap_ci: level in (0, 1)");

  std::vector<double> pos, neg, leads;
  split_classes(scores, pos, neg);
  const bool rank_stat = statistic == Statistic::auroc || statistic == Statistic::auprc;
  if (rank_stat) {
    // Validates the pool for the statistic.
    if (statistic == Statistic::auroc) auroc_of(pos, neg);
    else auprc_of(pos, neg);
  } else {
    const OperatingPoint op = operating_point(scores);
    const auto& src = statistic == Statistic::median_lead_tp ? op.leads_tp : op.leads_all;
    leads.assign(src.begin(), src.end());
    if (leads.empty()) {
      throw ValidationError(std::string("bootstrap_ci: ") + to_string(statistic) +
                            " is undefined, no qualifying alarms");
    }
  }

  auto resample = [](const std::vector<double>& src, std::mt19937_64& rng) {
    std::vector<double> out(src.size());
    if (src.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
    for (auto& x : out) x = src[pick(rng)];
    return out;
  };

  std::vector<double> reps(static_cast<std::size_t>(n_boot));
  const std::string stream = std::string("bootstrap/") + to_string(statistic);
  parallel_for(reps.size(), threads, [&](std::size_t r) {
    auto rng = substream(seed, stream, r);
    if (rank_stat) {
      const auto p = resample(pos, rng);
      const auto n = resample(neg, rng);
      reps[r] = statistic == Statistic::auroc ? auroc_of(p, n) : auprc_of(p, n);
    } else {
      reps[r] = median(resample(leads, rng));
    }
  });
  std::sort(reps.begin(), reps.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(reps, tail), quantile_sorted(reps, 1.0 - tail)};
}

double fair_fpr_threshold(std::span<const RunScore> calibration, double target_fpr) {
  if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) {
    throw ValidationError("fair_fpr_threshold: target FPR must be in [0, 1]");
  }
  std::vector<double> neg;
  for (const auto& s : calibration) {
    if (s.label.kind == RunKind::non_grok) neg.push_back(s.score);
  }
  if (neg.empty()) {
    throw ValidationError("fair_fpr_threshold: calibration pool has no non-grokking runs");
  }
  std::sort(neg.begin(), neg.end());
  const auto n = static_cast<std::int64_t>(neg.size());
  const auto allowed = static_cast<std::int64_t>(
      std::floor(target_fpr * static_cast<double>(n) + 1e-9));
  if (allowed >= n) return neg.front();
  // Alarms fire on score >= threshold; at most `allowed` scores may reach it.
  const double pivot = neg[static_cast<std::size_t>(n - allowed - 1)];
  return std::nextafter(pivot, std::numeric_limits<double>::infinity());
}

std::vector<CalibrationRow> aggregate_calibration(
    const std::map<std::string, std::vector<WindowDiagnostics>>& groups) {
  std::vector<CalibrationRow> rows;
  for (const auto& [group, diags] : groups) {
    if (diags.empty()) {
      throw ValidationError("aggregate_calibration: group '" + group + "' has no windows");
    }
    CalibrationRow row;
    row.group = group;
    row.n_windows = diags.size();
    for (const auto& d : diags) {
      row.mean_holdout_rr += d.holdout_rr;
      row.mean_persistence_rr += d.persistence_rr;
      row.mean_gain += d.persistence_rr - d.holdout_rr;
    }
    const auto n = static_cast<double>(diags.size());
    row.mean_holdout_rr /= n;
    row.mean_persistence_rr /= n;
    row.mean_gain /= n;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qdmd

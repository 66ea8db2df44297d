#include "qdmd/pipeline.hpp"

#include <algorithm>
#include <map>

#include "qdmd/alarm_rules.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/parallel.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/trajectory_io.hpp"

namespace qdmd {

using nlohmann::ordered_json;

namespace {

std::vector<const RunRecord*> sorted_runs(const std::vector<RunRecord>& runs) {
  std::vector<const RunRecord*> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(&r);
  std::sort(out.begin(), out.end(),
            [](const RunRecord* a, const RunRecord* b) { return a->run_id < b->run_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->run_id == out[i - 1]->run_id) {
      throw ValidationError("duplicate run '" + out[i]->run_id + "'");
    }
  }
  return out;
}

// Diagnostics of each run, ordered by window index.
std::map<std::string, std::vector<WindowDiagnostics>> by_run(
    const std::vector<WindowDiagnostics>& diags) {
  std::map<std::string, std::vector<WindowDiagnostics>> out;
  for (const auto& d : diags) out[d.run_id].push_back(d);
  for (auto& [id, ws] : out) {
    std::sort(ws.begin(), ws.end(), [](const auto& a, const auto& b) {
      return a.window_index < b.window_index;
    });
    for (std::size_t i = 1; i < ws.size(); ++i) {
      if (ws[i].window_index == ws[i - 1].window_index) {
        throw ValidationError("run '" + id + "': duplicate window " +
                              std::to_string(ws[i].window_index));
      }
    }
  }
  return out;
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json optional_json(const std::optional<std::int64_t>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json interval_json(const Interval& i) { return ordered_json::array({i.lo, i.hi}); }

ordered_json alarm_json(const AlarmEvent& e) {
  ordered_json j;
  j["fired"] = e.fired;
  j["alarm_step"] = optional_json(e.alarm_step);
  j["triggering_window"] =
      e.triggering_window ? ordered_json(*e.triggering_window) : ordered_json(nullptr);
  j["baseline"] = e.baseline;
  j["zero_baseline"] = e.zero_baseline;
  return j;
}

ordered_json operating_json(const OperatingPoint& op) {
  ordered_json j;
  j["n_grok"] = op.n_grok;
  j["n_non"] = op.n_non;
  j["fired_grok"] = op.fired_grok;
  j["fired_non"] = op.fired_non;
  j["tp_before_onset"] = op.tp_before_onset;
  j["tpr"] = op.tpr;
  j["fpr"] = op.fpr;
  j["median_lead_tp"] = optional_json(op.median_lead_tp);
  j["median_lead_all"] = optional_json(op.median_lead_all);
  j["leads_tp"] = op.leads_tp;
  j["leads_all"] = op.leads_all;
  return j;
}

std::vector<RunScore> subset(const std::vector<RunScore>& scores,
                             const std::vector<std::string>& ids, const char* what) {
  std::vector<RunScore> out;
  for (const auto& id : ids) {
    const auto it = std::find_if(scores.begin(), scores.end(),
                                 [&](const RunScore& s) { return s.run_id == id; });
    if (it == scores.end()) {
      throw ValidationError(std::string(what) + " run '" + id + "' is not in the pool");
    }
    out.push_back(*it);
  }
  std::sort(out.begin(), out.end(),
            [](const RunScore& a, const RunScore& b) { return a.run_id < b.run_id; });
  return out;
}

}  // namespace

std::vector<QuantileTrajectory> embed_pool(const std::vector<RunRecord>& runs,
                                           const ToolConfig& cfg) {
  const auto order = sorted_runs(runs);
  std::vector<QuantileTrajectory> out(order.size());
  parallel_for(order.size(), cfg.threads,
               [&](std::size_t i) { out[i] = embed_run(*order[i], cfg.grid); });
  return out;
}

std::vector<WindowDiagnostics> diagnose_pool(const std::vector<RunRecord>& runs,
                                             const ToolConfig& cfg) {
  cfg.dmd.validate();
  const auto order = sorted_runs(runs);
  std::vector<std::vector<WindowDiagnostics>> per_run(order.size());
  parallel_for(order.size(), cfg.threads, [&](std::size_t i) {
    per_run[i] = diagnose_run(embed_run(*order[i], cfg.grid), cfg.dmd);
  });
  std::vector<WindowDiagnostics> out;
  for (auto& ws : per_run) {
    for (auto& w : ws) out.push_back(std::move(w));
  }
  return out;
}

ordered_json alarm_report(const std::vector<WindowDiagnostics>& diags, const ToolConfig& cfg) {
  cfg.alarm.validate();
  ordered_json runs = ordered_json::array();
  for (const auto& [id, ws] : by_run(diags)) {
    AlarmEvent e;
    try {
      e = evaluate_alarm(std::span<const WindowDiagnostics>(ws), cfg.alarm);
    } catch (const ValidationError& err) {
      throw ValidationError("run '" + id + "': " + err.what());
    }
    ordered_json j;
    j["run_id"] = id;
    j["fired"] = e.fired;
    j["alarm_step"] = optional_json(e.alarm_step);
    j["baseline"] = e.baseline;
    j["rule"] = to_string(cfg.alarm.rule);
    j["tau"] = cfg.alarm.tau;
    j["K"] = cfg.alarm.consecutive();
    j["triggering_window"] =
        e.triggering_window ? ordered_json(*e.triggering_window) : ordered_json(nullptr);
    j["zero_baseline"] = e.zero_baseline;
    runs.push_back(std::move(j));
  }
  ordered_json report;
  report["config"] = cfg.to_json();
  report["runs"] = std::move(runs);
  return report;
}

ordered_json evaluate_report(const std::vector<RunRecord>& runs,
                             const std::vector<WindowDiagnostics>& diags,
                             const ToolConfig& cfg) {
  cfg.validate();
  const auto order = sorted_runs(runs);
  std::vector<RunRecord> pool;
  pool.reserve(order.size());
  for (const auto* r : order) pool.push_back(*r);
  if (pool.empty()) throw ValidationError("evaluate: the run pool is empty");

  std::vector<RunLabel> labels;
  for (const auto& r : pool) labels.push_back(label_run(r, cfg.label));

  const auto grouped = by_run(diags);
  for (const auto& [id, ws] : grouped) {
    const bool known = std::any_of(pool.begin(), pool.end(),
                                   [&](const RunRecord& r) { return r.run_id == id; });
    if (!known) throw ValidationError("diagnostics for run '" + id + "' have no matching run");
  }

  std::map<std::string, std::vector<SignalPoint>> traces;
  if (cfg.eval.signal == "residual") {
    for (const auto& r : pool) {
      const auto it = grouped.find(r.run_id);
      if (it == grouped.end()) {
        throw ValidationError("no diagnostics for run '" + r.run_id + "'");
      }
      traces[r.run_id] = residual_trace(it->second);
    }
  } else {
    traces = aux_traces(pool, cfg.eval.signal);
  }

  auto scores = score_runs(pool, labels, traces);
  for (auto& s : scores) {
    try {
      s.alarm = evaluate_alarm(std::span<const SignalPoint>(traces.at(s.run_id)), cfg.alarm);
    } catch (const ValidationError& err) {
      throw ValidationError("run '" + s.run_id + "': " + err.what());
    }
    s.lead = lead_time(*s.alarm, s.label);
  }

  ordered_json warnings = ordered_json::array();
  const auto op = operating_point(scores);

  ordered_json report;
  report["n_grok"] = op.n_grok;
  report["n_non"] = op.n_non;
  report["n_early_gen"] = static_cast<int>(std::count_if(
      scores.begin(), scores.end(),
      [](const RunScore& s) { return s.label.kind == RunKind::early_gen; }));
  report["signal"] = cfg.eval.signal;
  report["auroc"] = auroc(scores);
  report["auprc"] = auprc(scores);
  report["tpr"] = op.tpr;
  report["fpr"] = op.fpr;
  report["fired_grok"] = op.fired_grok;
  report["fired_non"] = op.fired_non;
  report["tp_before_onset"] = op.tp_before_onset;
  report["median_lead_tp"] = optional_json(op.median_lead_tp);
  report["median_lead_all"] = optional_json(op.median_lead_all);

  ordered_json intervals;
  intervals["tpr"] = op.n_grok > 0 ? interval_json(binom_interval(op.fired_grok, op.n_grok))
                                   : ordered_json(nullptr);
  intervals["fpr"] = op.n_non > 0 ? interval_json(binom_interval(op.fired_non, op.n_non))
                                  : ordered_json(nullptr);
  for (const auto stat : {Statistic::auroc, Statistic::auprc, Statistic::median_lead_tp,
                          Statistic::median_lead_all}) {
    try {
      intervals[to_string(stat)] = interval_json(
          bootstrap_ci(scores, stat, cfg.eval.n_boot, cfg.seed, 0.95, cfg.threads));
    } catch (const ValidationError& err) {
      intervals[to_string(stat)] = nullptr;
      warnings.push_back(err.what());
    }
  }
  report["intervals"] = std::move(intervals);
  report["baseline_rule"] = "median of the first " +
                            std::to_string(cfg.alarm.baseline_windows) +
                            " windows; the scan starts after them";

  if (!cfg.eval.calibration_runs.empty()) {
    const auto calib = subset(scores, cfg.eval.calibration_runs, "calibration");
    auto test = subset(scores, cfg.eval.test_runs, "test");
    const double threshold = fair_fpr_threshold(calib, cfg.eval.target_fpr);
    for (auto& s : test) {
      AlarmEvent e;
      e.fired = s.score >= threshold;
      s.alarm = e;
    }
    const auto top = operating_point(test);
    ordered_json fair;
    fair["target_fpr"] = cfg.eval.target_fpr;
    fair["threshold"] = threshold;
    fair["n_calibration"] = calib.size();
    fair["n_test"] = test.size();
    fair["n_grok"] = top.n_grok;
    fair["n_non"] = top.n_non;
    fair["fired_grok"] = top.fired_grok;
    fair["fired_non"] = top.fired_non;
    fair["tpr"] = top.tpr;
    fair["fpr"] = top.fpr;
    report["fair_fpr"] = std::move(fair);
  }

  std::map<std::string, std::vector<WindowDiagnostics>> groups;
  for (const auto& r : pool) {
    const auto it = grouped.find(r.run_id);
    if (it == grouped.end()) continue;
    auto& g = groups[r.meta.value(cfg.eval.group_by)];
    g.insert(g.end(), it->second.begin(), it->second.end());
  }
  ordered_json calibration = ordered_json::array();
  if (!groups.empty()) {
    for (const auto& row : aggregate_calibration(groups)) {
      calibration.push_back({{"group", row.group},
                             {"n_windows", row.n_windows},
                             {"mean_holdout_rr", row.mean_holdout_rr},
                             {"mean_persistence_rr", row.mean_persistence_rr},
                             {"mean_gain", row.mean_gain}});
    }
  }
  report["calibration"] = {{"group_by", cfg.eval.group_by}, {"rows", std::move(calibration)}};

  ordered_json per_run = ordered_json::array();
  for (const auto& s : scores) {
    ordered_json j;
    j["run_id"] = s.run_id;
    j["label"] = to_string(s.label.kind);
    j["onset_step"] = optional_json(s.label.onset_step);
    j["score"] = s.score;
    j["alarm"] = alarm_json(*s.alarm);
    j["lead"] = optional_json(s.lead);
    per_run.push_back(std::move(j));
  }
  report["runs"] = std::move(per_run);
  report["operating_point"] = operating_json(op);
  report["warnings"] = std::move(warnings);
  report["config"] = cfg.to_json();
  return report;
}

Spectrum select_spectrum(const std::vector<WindowDiagnostics>& diags, const std::string& run_id,
                         int window_index) {
  for (const auto& d : diags) {
    if (d.run_id == run_id && d.window_index == window_index) {
      if (d.eigenvalues.empty()) {
        throw ValidationError("run '" + run_id + "' window " + std::to_string(window_index) +
                              " has no retained eigenvalues");
      }
      return d.eigenvalues;
    }
  }
  throw ValidationError("no diagnostics for run '" + run_id + "' window " +
                        std::to_string(window_index));
}

ordered_json compare_report(const Spectrum& a, const Spectrum& b, const ToolConfig& cfg) {
  const auto rep = shuffle_control(a, b, cfg.shuffle.n_shuffles, cfg.seed, cfg.shuffle.exact,
                                   cfg.threads);
  const auto sigma = optimal_matching(a, b);
  ordered_json j;
  j["observed"] = rep.observed;
  j["exceedance"] = rep.exceedance;
  j["n_shuffles"] = rep.n_shuffles;
  j["seed"] = rep.seed;
  j["exact"] = rep.exact;
  j["k"] = rep.k;
  j["matching"] = sigma;
  j["config"] = cfg.to_json();
  return j;
}

std::string dump_report(const ordered_json& report) { return report.dump(2) + "\n"; }

}  // namespace qdmd

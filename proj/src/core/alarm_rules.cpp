#include "qdmd/alarm_rules.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdmd/errors.hpp"

namespace qdmd {

const char* to_string(AlarmRule rule) {
  return rule == AlarmRule::instantaneous ? "instantaneous" : "sustained";
}

AlarmRule parse_alarm_rule(const std::string& text) {
  if (text == "sustained") return AlarmRule::sustained;
  if (text == "instantaneous") return AlarmRule::instantaneous;
  throw ValidationError("unknown alarm rule '" + text +
                        "' (expected sustained or instantaneous)");
}

void AlarmConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("alarm.tau must be > 0");
  if (k < 1) throw ValidationError("alarm.K must be >= 1");
  if (baseline_windows < 1) throw ValidationError("alarm.baseline_windows must be >= 1");
}

double run_baseline(std::span<const double> values, int n) {
  if (n < 1) throw ValidationError("run_baseline: n must be >= 1");
  if (values.size() < static_cast<std::size_t>(n)) {
    throw ValidationError("run_baseline: " + std::to_string(values.size()) +
                          " windows, baseline needs " + std::to_string(n));
  }
  std::vector<double> head(values.begin(), values.begin() + n);
  std::sort(head.begin(), head.end());
  const std::size_t mid = head.size() / 2;
  return head.size() % 2 == 1 ? head[mid] : 0.5 * (head[mid - 1] + head[mid]);
}

double run_baseline(std::span<const WindowDiagnostics> diags, int n) {
  std::vector<double> r;
  r.reserve(diags.size());
  for (const auto& d : diags) r.push_back(d.residual);
  return run_baseline(r, n);
}

AlarmEvent evaluate_alarm(std::span<const SignalPoint> trace, const AlarmConfig& cfg) {
  cfg.validate();
  std::vector<double> values;
  values.reserve(trace.size());
  for (const auto& p : trace) values.push_back(p.value);

  AlarmEvent event;
  event.baseline = run_baseline(values, cfg.baseline_windows);
  event.zero_baseline = event.baseline == 0.0;
  const double cut = cfg.tau * event.baseline;
  const int need = cfg.consecutive();

  // Baseline windows may count toward a streak but cannot fire themselves.
  int streak = 0;
  for (std::size_t w = 0; w < values.size(); ++w) {
    streak = values[w] > cut ? streak + 1 : 0;
    if (w >= static_cast<std::size_t>(cfg.baseline_windows) && streak >= need) {
      event.fired = true;
      event.alarm_step = trace[w].step;
      event.triggering_window = static_cast<int>(w);
      break;
    }
  }
  return event;
}

AlarmEvent evaluate_alarm(std::span<const WindowDiagnostics> diags, const AlarmConfig& cfg) {
  std::vector<SignalPoint> trace;
  trace.reserve(diags.size());
  for (const auto& d : diags) trace.push_back({d.end_step, d.residual});
  return evaluate_alarm(trace, cfg);
}

std::optional<std::int64_t> lead_time(const AlarmEvent& alarm, const RunLabel& label) {
  if (label.kind != RunKind::grok || !alarm.fired || !alarm.alarm_step ||
      !label.onset_step) {
    return std::nullopt;
  }
  return *label.onset_step - *alarm.alarm_step;
}

}  // namespace qdmd

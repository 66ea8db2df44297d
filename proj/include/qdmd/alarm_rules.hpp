#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "qdmd/hankel_dmd.hpp"
#include "qdmd/run_record.hpp"

namespace qdmd {

enum class AlarmRule { instantaneous, sustained };

const char* to_string(AlarmRule rule);
AlarmRule parse_alarm_rule(const std::string& text);

struct AlarmConfig {
  double tau = 10.0;
  int k = 2;  // consecutive exceedances; instantaneous forces 1
  int baseline_windows = 3;
  AlarmRule rule = AlarmRule::sustained;

  int consecutive() const { return rule == AlarmRule::instantaneous ? 1 : k; }
  void validate() const;
};

struct AlarmEvent {
  bool fired = false;
  std::optional<std::int64_t> alarm_step;
  std::optional<int> triggering_window;
  double baseline = 0.0;
  bool zero_baseline = false;

  bool operator==(const AlarmEvent&) const = default;
};

// Median of the first n values.
double run_baseline(std::span<const double> values, int n);
double run_baseline(std::span<const WindowDiagnostics> diags, int n);

// Threshold rule over an ordered signal trace (one point per window, stamped
// with the step at which the point becomes available).
AlarmEvent evaluate_alarm(std::span<const SignalPoint> trace, const AlarmConfig& cfg);
AlarmEvent evaluate_alarm(std::span<const WindowDiagnostics> diags,
                          const AlarmConfig& cfg);

// onset - alarm step for grokking runs with a fired alarm.
std::optional<std::int64_t> lead_time(const AlarmEvent& alarm, const RunLabel& label);

}  // namespace qdmd

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qdmd {

// One training step's sample of the scalar observable (one value per probe).
struct ObservableRecord {
  std::string run_id;
  std::int64_t step = 0;
  std::vector<double> samples;

  bool operator==(const ObservableRecord&) const = default;
};

struct AccuracyPoint {
  std::int64_t step = 0;
  double accuracy = 0.0;

  bool operator==(const AccuracyPoint&) const = default;
};

struct SignalPoint {
  std::int64_t step = 0;
  double value = 0.0;

  bool operator==(const SignalPoint&) const = default;
};

struct RunMeta {
  std::optional<std::int64_t> seed;
  std::optional<double> weight_decay;
  std::optional<std::string> task;

  // Value of a metadata key rendered as text, or "" when absent. Used to
  // group runs (e.g. by "weight_decay").
  std::string value(const std::string& key) const;

  bool operator==(const RunMeta&) const = default;
};

struct RunRecord {
  std::string run_id;
  RunMeta meta;
  std::vector<ObservableRecord> observable;  // strictly increasing steps
  std::vector<AccuracyPoint> test_acc;       // strictly increasing steps
  std::map<std::string, std::vector<SignalPoint>> aux_signals;

  bool operator==(const RunRecord&) const = default;
};

enum class RunKind { grok, non_grok, early_gen };

struct RunLabel {
  RunKind kind = RunKind::non_grok;
  std::optional<std::int64_t> onset_step;

  bool operator==(const RunLabel&) const = default;
};

const char* to_string(RunKind kind);

}  // namespace qdmd

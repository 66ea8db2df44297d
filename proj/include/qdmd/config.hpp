#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdmd/alarm_rules.hpp"
#include "qdmd/hankel_dmd.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/synthetic_gen.hpp"
#include "qdmd/trajectory_io.hpp"

namespace qdmd {

struct EvalSettings {
  std::string signal = "residual";
  int n_boot = 10000;
  double target_fpr = 0.5;
  std::string group_by = "weight_decay";
  std::vector<std::string> calibration_runs;
  std::vector<std::string> test_runs;
};

struct ShuffleSettings {
  std::int64_t n_shuffles = 10000;
  bool exact = true;  // enumerate when k <= 16
};

struct SynthPoolSettings {
  int n_grok = 5;
  int n_non = 12;
  PoolShape shape;
};

// Every tunable of the pipeline. Keys are "section.name"; files use a flat
// TOML subset ([section] headers, key = value, # comments).
struct ToolConfig {
  QuantileGrid grid;
  DmdConfig dmd;
  AlarmConfig alarm;
  LabelPolicy label;
  EvalSettings eval;
  ShuffleSettings shuffle;
  SynthPoolSettings synth;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency; never affects output

  // Sets one key from its textual value. Unknown keys and out-of-range values
  // raise ValidationError.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  void validate() const;

  // Resolved configuration echoed into reports. Excludes `threads`.
  nlohmann::ordered_json to_json() const;

  static std::vector<std::string> keys();
};

}  // namespace qdmd

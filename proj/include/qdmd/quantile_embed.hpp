#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdmd/run_record.hpp"

namespace qdmd {

// Fixed probability levels at which every snapshot's quantile function is
// evaluated. Shared across all runs of one analysis.
class QuantileGrid {
 public:
  // The default 19-level grid 0.05, 0.10, ..., 0.95.
  QuantileGrid();
  // Levels must lie in (0, 1) and be strictly increasing.
  explicit QuantileGrid(std::vector<double> levels);

  std::span<const double> levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }

  bool operator==(const QuantileGrid&) const = default;

 private:
  std::vector<double> levels_;
};

struct QuantileVector {
  std::int64_t step = 0;
  std::vector<double> values;  // length d

  bool operator==(const QuantileVector&) const = default;
};

struct QuantileTrajectory {
  std::string run_id;
  QuantileGrid grid;
  std::vector<QuantileVector> points;  // strictly increasing steps
};

// Quantiles of the empirical distribution of `samples` at each grid level,
// by linear interpolation of order statistics at position p*(n-1). The result
// is non-decreasing. Throws ValidationError on empty or non-finite input.
std::vector<double> empirical_quantiles(std::span<const double> samples,
                                        const QuantileGrid& grid);

QuantileTrajectory embed_run(const RunRecord& run, const QuantileGrid& grid);

// 2-Wasserstein distance between two empirical distributions on the real
// line, integrating the squared difference of their (piecewise-constant)
// quantile functions exactly over (0, 1).
double w2_empirical(std::span<const double> a, std::span<const double> b);

}  // namespace qdmd

#include "qdmd/quantile_embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "qdmd/errors.hpp"

namespace qdmd {

namespace {

std::vector<double> standard_levels() {
  std::vector<double> levels;
  for (int k = 1; k <= 19; ++k) levels.push_back(k / 20.0);
  return levels;
}

void require_samples(std::span<const double> samples, const char* what) {
  if (samples.empty()) throw ValidationError(std::string(what) + ": empty sample set");
  for (double x : samples) {
    if (!std::isfinite(x)) {
      throw ValidationError(std::string(what) + ": non-finite sample value");
    }
  }
}

}  // namespace

QuantileGrid::QuantileGrid() : levels_(standard_levels()) {}

QuantileGrid::QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ValidationError("quantile grid: no levels");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const double p = levels_[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw ValidationError("quantile grid: level " + std::to_string(p) +
                            " outside (0, 1)");
    }
    if (i > 0 && !(p > levels_[i - 1])) {
      throw ValidationError("quantile grid: levels must be strictly increasing");
    }
  }
}

std::vector<double> empirical_quantiles(std::span<const double> samples,
                                        const QuantileGrid& grid) {
  require_samples(samples, "empirical_quantiles");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::vector<double> out;
  out.reserve(grid.size());
  for (double p : grid.levels()) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    double q = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    // Rounding can break monotonicity by an ulp at order-statistic boundaries.
    if (!out.empty()) q = std::max(q, out.back());
    out.push_back(q);
  }
  return out;
}

QuantileTrajectory embed_run(const RunRecord& run, const QuantileGrid& grid) {
  if (run.observable.empty()) {
    throw ValidationError("embed_run: run '" + run.run_id + "' has no observable records");
  }
  QuantileTrajectory traj{run.run_id, grid, {}};
  traj.points.reserve(run.observable.size());
  for (const auto& rec : run.observable) {
    try {
      traj.points.push_back({rec.step, empirical_quantiles(rec.samples, grid)});
    } catch (const ValidationError& e) {
      throw ValidationError("run '" + run.run_id + "' step " + std::to_string(rec.step) +
                            ": " + e.what());
    }
  }
  return traj;
}

double w2_empirical(std::span<const double> a, std::span<const double> b) {
  require_samples(a, "w2_empirical");
  require_samples(b, "w2_empirical");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());

  // Quantile breakpoints i/n and j/m on the common grid 1/(n*m), kept in
  // integers so the merged partition of (0, 1) is exact.
  const auto n = static_cast<std::int64_t>(x.size());
  const auto m = static_cast<std::int64_t>(y.size());
  const double total = static_cast<double>(n) * static_cast<double>(m);
  std::int64_t i = 0, j = 0, cursor = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::int64_t next_x = (i + 1) * m;
    const std::int64_t next_y = (j + 1) * n;
    const std::int64_t next = std::min(next_x, next_y);
    const double diff = x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)];
    acc += static_cast<double>(next - cursor) / total * diff * diff;
    cursor = next;
    if (next_x == next) ++i;
    if (next_y == next) ++j;
  }
  return std::sqrt(acc);
}

}  // namespace qdmd

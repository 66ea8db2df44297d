#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qdmd/numeric_kernel.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/run_record.hpp"

namespace qdmd {

enum class SynthKind { linear_system, regime_switch, random_walk, constant };

struct SynthSpec {
  SynthKind kind = SynthKind::linear_system;
  // Planted spectrum. Non-real entries must come with their conjugate.
  std::vector<std::complex<double>> eigenvalues;
  // Spectrum after the switch (regime_switch); defaults to 0.8 * eigenvalues.
  std::vector<std::complex<double>> eigenvalues_after;
  std::int64_t switch_step = 0;
  // Norm of the level shift at the switch, as a multiple of the level
  // vector's norm (or of sqrt(d) when level is 0).
  double switch_magnitude = 1.0;
  // Scale of the constant offset vector level * (1 + k/d), k = 0..d-1.
  double level = 0.0;
  double noise_sigma = 0.0;  // additive observation noise per coordinate
  std::int64_t steps = 100;  // number of points
  std::int64_t record_every = 1;
  int dim = 2;
  std::uint64_t seed = 0;
};

struct SynthResult {
  QuantileTrajectory trajectory;
  DenseMatrix clean;            // noiseless points, one column per point
  DenseMatrix offset_before;    // level vector before the switch (d x 1)
  DenseMatrix offset_after;
  DenseMatrix operator_before;  // d x d
  DenseMatrix operator_after;
};

// Deterministic given spec.seed. Linear dynamics act on the deviation from
// the level vector: z_{t+1} - c = A (z_t - c).
SynthResult generate(const SynthSpec& spec);

struct PoolShape {
  std::int64_t max_steps = 6000;
  std::int64_t record_every = 10;
  int probe_size = 100;
  std::int64_t aux_every = 50;
  // Fraction of the way each probe moves toward its post-transition value
  // in grokking-like runs, in (0, 1].
  double switch_magnitude = 1.0;
};

// Labeled synthetic pool: grokking-like runs undergo a spread-out flip of the
// probe distribution followed by a test-accuracy rise through 0.99; the
// others stay stationary with accuracy plateaued well below threshold.
std::vector<RunRecord> grok_like_pool(int n_grok, int n_non, std::uint64_t seed,
                                      const PoolShape& shape = {});

}  // namespace qdmd

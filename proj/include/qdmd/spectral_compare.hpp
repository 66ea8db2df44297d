#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qdmd {

using Spectrum = std::vector<std::complex<double>>;

// Exact minimum-cost assignment for a square cost matrix (Hungarian method).
// Returns the total cost and, for each row, the assigned column.
std::pair<double, std::vector<int>> solve_assignment(const Eigen::MatrixXd& cost);

// sqrt((1/k) * min over assignments of sum |a_i - b_sigma(i)|^2).
double spectral_distance(std::span<const std::complex<double>> a,
                         std::span<const std::complex<double>> b);

// Permutation minimising sum |a_j - b_sigma(j)| (unsquared moduli); ties go
// to the lexicographically smallest permutation. sigma[j] indexes into b.
std::vector<int> optimal_matching(std::span<const std::complex<double>> a,
                                  std::span<const std::complex<double>> b);

struct ShuffleReport {
  double observed = 0.0;
  double exceedance = 0.0;
  std::int64_t n_shuffles = 0;  // patterns evaluated (2^k in exact mode)
  std::uint64_t seed = 0;
  bool exact = false;
  int k = 0;
};

inline constexpr int kMaxExactShuffleSize = 16;

// Relative slack used when deciding whether a shuffled distance reaches the
// observed one, so the identity pattern always counts despite rounding.
inline constexpr double kExceedanceRelTol = 1e-12;

// Randomized pairwise-swap null for the spectral distance. With `exact` and
// k <= 16, all 2^k swap patterns are enumerated and the seed is ignored.
ShuffleReport shuffle_control(std::span<const std::complex<double>> a,
                              std::span<const std::complex<double>> b,
                              std::int64_t n_shuffles, std::uint64_t seed,
                              bool exact, int threads = 1);

}  // namespace qdmd

#include "qdmd/spectral_compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdmd/errors.hpp"
#include "qdmd/parallel.hpp"
#include "qdmd/random.hpp"

namespace qdmd {

std::pair<double, std::vector<int>> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("assignment: cost matrix not square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {0.0, {}};
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Shortest augmenting path with potentials; 1-based internal indexing.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[match_col[j] - 1] = j - 1;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, assignment[i]);
  return {total, assignment};
}

namespace {

void require_comparable(std::span<const std::complex<double>> a,
                        std::span<const std::complex<double>> b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": spectra differ in size (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                          ")");
  }
  for (const auto& x : a) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
      throw ValidationError(std::string(what) + ": non-finite spectral point");
    }
  }
  for (const auto& x : b) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
      throw ValidationError(std::string(what) + ": non-finite spectral point");
    }
  }
}

Eigen::MatrixXd cost_matrix(std::span<const std::complex<double>> a,
                            std::span<const std::complex<double>> b, bool squared) {
  const auto k = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd c(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double m = std::abs(a[i] - b[j]);
      c(i, j) = squared ? m * m : m;
    }
  }
  return c;
}

double distance_unchecked(std::span<const std::complex<double>> a,
                          std::span<const std::complex<double>> b) {
  if (a.empty()) return 0.0;
  const Eigen::MatrixXd cost = cost_matrix(a, b, true);
  const auto assigned = solve_assignment(cost).second;
  // Summing the matched costs in sorted order makes d(a, b) == d(b, a) exactly.
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    terms[i] = cost(static_cast<Eigen::Index>(i), assigned[i]);
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return std::sqrt(total / static_cast<double>(a.size()));
}

}  // namespace

double spectral_distance(std::span<const std::complex<double>> a,
                         std::span<const std::complex<double>> b) {
  require_comparable(a, b, "spectral_distance");
  if (a.empty()) throw ValidationError("spectral_distance: empty spectra");
  return distance_unchecked(a, b);
}

std::vector<int> optimal_matching(std::span<const std::complex<double>> a,
                                  std::span<const std::complex<double>> b) {
  require_comparable(a, b, "optimal_matching");
  const auto k = static_cast<Eigen::Index>(a.size());
  const Eigen::MatrixXd cost = cost_matrix(a, b, false);
  const double best = solve_assignment(cost).first;
  const double slack = 1e-12 * (1.0 + std::abs(best));

  // Fix rows in order, each to the smallest column that still admits an
  // optimal completion.
  std::vector<int> sigma;
  std::vector<Eigen::Index> free_cols(static_cast<std::size_t>(k));
  std::iota(free_cols.begin(), free_cols.end(), 0);
  double fixed_cost = 0.0;
  for (Eigen::Index row = 0; row < k; ++row) {
    bool placed = false;
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
      const Eigen::Index col = free_cols[c];
      const Eigen::Index rest = k - row - 1;
      Eigen::MatrixXd sub(rest, rest);
      for (Eigen::Index r = 0; r < rest; ++r) {
        Eigen::Index sc = 0;
        for (std::size_t cc = 0; cc < free_cols.size(); ++cc) {
          if (cc == c) continue;
          sub(r, sc++) = cost(row + 1 + r, free_cols[cc]);
        }
      }
      const double completion = fixed_cost + cost(row, col) + solve_assignment(sub).first;
      if (completion <= best + slack) {
        sigma.push_back(static_cast<int>(col));
        fixed_cost += cost(row, col);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(c));
        placed = true;
        break;
      }
    }
    if (!placed) throw NumericError("optimal_matching: no optimal completion found");
  }
  return sigma;
}

ShuffleReport shuffle_control(std::span<const std::complex<double>> a,
                              std::span<const std::complex<double>> b,
                              std::int64_t n_shuffles, std::uint64_t seed, bool exact,
                              int threads) {
  require_comparable(a, b, "shuffle_control");
  if (a.empty()) throw ValidationError("shuffle_control: empty spectra");
  const int k = static_cast<int>(a.size());
  const bool enumerate = exact && k <= kMaxExactShuffleSize;
  if (!enumerate && n_shuffles < 1) {
    throw ValidationError("shuffle_control: n_shuffles must be >= 1");
  }
  if (k > 64) throw ValidationError("shuffle_control: at most 64 spectral points");

  ShuffleReport report;
  report.k = k;
  report.seed = seed;
  report.exact = enumerate;
  report.observed = distance_unchecked(a, b);

  const std::vector<int> sigma = optimal_matching(a, b);
  std::vector<std::complex<double>> left(a.begin(), a.end());
  std::vector<std::complex<double>> right(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) right[static_cast<std::size_t>(j)] = b[static_cast<std::size_t>(sigma[j])];

  const double threshold = report.observed * (1.0 - kExceedanceRelTol);
  auto exceeds = [&](std::uint64_t pattern) {
    std::vector<std::complex<double>> x = left, y = right;
    for (int j = 0; j < k; ++j) {
      if ((pattern >> j) & 1ULL) std::swap(x[static_cast<std::size_t>(j)], y[static_cast<std::size_t>(j)]);
    }
    return distance_unchecked(x, y) >= threshold;
  };

  const std::int64_t count = enumerate ? (std::int64_t{1} << k) : n_shuffles;
  std::vector<char> hit(static_cast<std::size_t>(count), 0);
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    std::uint64_t pattern = i;
    if (!enumerate) {
      auto rng = substream(seed, "shuffle", i);
      pattern = rng();
    }
    hit[i] = exceeds(pattern) ? 1 : 0;
  });
  const auto hits = std::count(hit.begin(), hit.end(), 1);
  report.n_shuffles = count;
  report.exceedance = static_cast<double>(hits) / static_cast<double>(count);
  return report;
}

}  // namespace qdmd

#include "qdmd/hankel_dmd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qdmd/errors.hpp"

namespace qdmd {

void DmdConfig::validate() const {
  if (delays < 1) throw ValidationError("dmd.delays must be >= 1");
  if (modes < 1 || modes > kMaxEigDimension) {
    throw ValidationError("dmd.modes must be in [1, 64]");
  }
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0)) {
    throw ValidationError("dmd.energy_threshold must be in (0, 1]");
  }
  if (segment_steps < 1) throw ValidationError("dmd.segment_steps must be >= 1");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ValidationError("dmd.holdout_fraction must be in (0, 1)");
  }
  if (!(svd_rel_tol >= 0.0 && svd_rel_tol < 1.0)) {
    throw ValidationError("dmd.svd_rel_tol must be in [0, 1)");
  }
}

DenseMatrix delay_embed(const DenseMatrix& z, int q) {
  if (q < 1) throw ValidationError("delay_embed: q must be >= 1");
  const Eigen::Index d = z.rows();
  const Eigen::Index n = z.cols();
  if (n < q) {
    throw ValidationError("delay_embed: window of " + std::to_string(n) +
                          " points is shorter than q = " + std::to_string(q));
  }
  const Eigen::Index count = n - q + 1;
  DenseMatrix xi(d * q, count);
  for (Eigen::Index t = 0; t < count; ++t) {
    for (int lag = 0; lag < q; ++lag) xi.block(lag * d, t, d, 1) = z.col(t + lag);
  }
  return xi;
}

DenseMatrix stack_points(std::span<const QuantileVector> window) {
  if (window.empty()) return DenseMatrix(0, 0);
  const auto d = static_cast<Eigen::Index>(window.front().values.size());
  DenseMatrix z(d, static_cast<Eigen::Index>(window.size()));
  for (std::size_t t = 0; t < window.size(); ++t) {
    const auto& v = window[t].values;
    if (static_cast<Eigen::Index>(v.size()) != d) {
      throw ValidationError("quantile vectors in a window differ in dimension");
    }
    z.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
  }
  return z;
}

int effective_rank(const Eigen::VectorXd& sigma, double threshold) {
  const double total = sigma.squaredNorm();
  if (!(total > 0.0)) return 1;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    acc += sigma(i) * sigma(i);
    if (acc >= threshold * total) return static_cast<int>(i + 1);
  }
  return static_cast<int>(sigma.size());
}

namespace {

void require_window(const DenseMatrix& z, int q) {
  if (z.cols() < q + 2) {
    throw ValidationError("window has " + std::to_string(z.cols()) +
                          " points; at least q + 2 = " + std::to_string(q + 2) +
                          " are required");
  }
  if (!z.allFinite()) throw ValidationError("window contains non-finite coordinates");
}

double relative_error(double err_sq, double ref_sq) {
  return ref_sq > 0.0 ? std::sqrt(err_sq / ref_sq) : 0.0;
}

}  // namespace

WindowCalibration calibrate_window(const DenseMatrix& z, const DmdConfig& cfg) {
  cfg.validate();
  require_window(z, cfg.delays);
  const DenseMatrix xi = delay_embed(z, cfg.delays);
  const Eigen::Index transitions = xi.cols() - 1;
  const Eigen::Index n_hold = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(cfg.holdout_fraction * transitions)));
  const Eigen::Index n_fit = transitions - n_hold;
  if (n_fit < 1 || n_hold < 1) {
    throw ValidationError("window too short for a holdout split");
  }

  // An exactly constant window is a fixed point of the fitted operator; skip
  // the solve so rounding in the pseudo-inverse cannot leak into the errors.
  bool constant = true;
  for (Eigen::Index t = 1; t < z.cols() && constant; ++t) constant = z.col(t) == z.col(0);
  if (constant) return {};

  // Least-squares operator on the leading transitions only.
  const DenseMatrix op = pinv_solve(xi.leftCols(n_fit), xi.middleCols(1, n_fit), cfg.svd_rel_tol);

  double err_dmd = 0.0, err_persist = 0.0, ref = 0.0;
  for (Eigen::Index t = n_fit; t < transitions; ++t) {
    const auto next = xi.col(t + 1);
    err_dmd += (next - op * xi.col(t)).squaredNorm();
    err_persist += (next - xi.col(t)).squaredNorm();
    ref += next.squaredNorm();
  }
  WindowCalibration out;
  out.holdout_rr = relative_error(err_dmd, ref);
  out.persistence_rr = relative_error(err_persist, ref);
  out.gain = out.persistence_rr - out.holdout_rr;
  return out;
}

WindowCalibration calibrate_window(std::span<const QuantileVector> window,
                                   const DmdConfig& cfg) {
  return calibrate_window(stack_points(window), cfg);
}

WindowDiagnostics fit_window(const DenseMatrix& z, const DmdConfig& cfg) {
  cfg.validate();
  require_window(z, cfg.delays);
  const DenseMatrix xi = delay_embed(z, cfg.delays);
  const Eigen::Index n = xi.cols();

  WindowDiagnostics out;
  const double signal_sq = xi.squaredNorm();
  if (signal_sq == 0.0) {
    out.degenerate = true;
    return out;
  }

  const DenseMatrix h_minus = xi.leftCols(n - 1);
  const DenseMatrix h_plus = xi.rightCols(n - 1);
  const SvdResult s = svd(h_minus);
  out.r_eff = effective_rank(s.sigma, cfg.energy_threshold);

  Eigen::Index numerical_rank = 0;
  if (s.sigma.size() > 0 && s.sigma(0) > 0.0) {
    const double cutoff = cfg.svd_rel_tol * s.sigma(0);
    while (numerical_rank < s.sigma.size() && s.sigma(numerical_rank) > cutoff) {
      ++numerical_rank;
    }
  }
  const Eigen::Index rho =
      std::min<Eigen::Index>({out.r_eff, cfg.modes, numerical_rank});

  DenseMatrix recon = DenseMatrix::Zero(xi.rows(), n);
  if (rho > 0) {
    const DenseMatrix u = s.u.leftCols(rho);
    DenseMatrix reduced = u.transpose() * h_plus * s.v.leftCols(rho);
    for (Eigen::Index j = 0; j < rho; ++j) reduced.col(j) /= s.sigma(j);

    const EigPairs eig = eig_real(reduced);
    const ComplexMatrix modes = u.cast<std::complex<double>>() * eig.vectors;
    const ComplexVector amplitudes =
        complex_lstsq(modes, xi.col(0).cast<std::complex<double>>(), cfg.svd_rel_tol);

    ComplexVector coeff = amplitudes;  // b .* lambda^t
    for (Eigen::Index t = 0; t < n; ++t) {
      recon.col(t) = (modes * coeff).real();
      coeff = coeff.cwiseProduct(eig.values);
    }
    out.eigenvalues.assign(eig.values.data(), eig.values.data() + eig.values.size());
  }
  out.residual = std::sqrt((xi - recon).squaredNorm() / signal_sq);
  if (!std::isfinite(out.residual)) {
    throw NumericError("reconstruction residual is not finite");
  }

  const WindowCalibration cal = calibrate_window(z, cfg);
  out.holdout_rr = cal.holdout_rr;
  out.persistence_rr = cal.persistence_rr;
  return out;
}

WindowDiagnostics fit_window(std::span<const QuantileVector> window, const DmdConfig& cfg) {
  WindowDiagnostics out = fit_window(stack_points(window), cfg);
  if (!window.empty()) {
    out.start_step = window.front().step;
    out.end_step = window.back().step;
  }
  return out;
}

std::vector<WindowDiagnostics> diagnose_run(const QuantileTrajectory& traj,
                                            const DmdConfig& cfg) {
  cfg.validate();
  const auto& pts = traj.points;
  if (pts.empty()) {
    throw ValidationError("run '" + traj.run_id + "': empty trajectory");
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].step <= pts[i - 1].step) {
      throw ValidationError("run '" + traj.run_id + "': steps are not strictly increasing");
    }
  }

  // The run covers [first, last + cadence), where cadence is the recording
  // interval, so a run logged every 2 steps up to 5998 spans 6000 steps.
  const std::int64_t first = pts.front().step;
  const std::int64_t last = pts.back().step;
  std::int64_t cadence = 1;
  if (pts.size() > 1) {
    cadence = pts[1].step - pts[0].step;
    for (std::size_t i = 2; i < pts.size(); ++i) {
      cadence = std::min(cadence, pts[i].step - pts[i - 1].step);
    }
  }
  const std::int64_t span = last - first + cadence;
  const std::int64_t n_windows = span / cfg.segment_steps;
  if (n_windows < 1) {
    std::ostringstream msg;
    msg << "run '" << traj.run_id << "' spans " << span << " steps, shorter than one "
        << cfg.segment_steps << "-step segment";
    throw ValidationError(msg.str());
  }

  std::vector<WindowDiagnostics> out;
  out.reserve(static_cast<std::size_t>(n_windows));
  const std::span<const QuantileVector> all(pts);
  std::size_t cursor = 0;
  for (std::int64_t w = 0; w < n_windows; ++w) {
    const std::int64_t start = first + w * cfg.segment_steps;
    const std::int64_t end = start + cfg.segment_steps;  // exclusive
    const std::size_t begin = cursor;
    while (cursor < all.size() && all[cursor].step < end) ++cursor;
    const auto window = all.subspan(begin, cursor - begin);
    WindowDiagnostics diag;
    try {
      diag = fit_window(stack_points(window), cfg);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "run '" << traj.run_id << "' window " << w << " [" << start << ", " << end
          << "): " << e.what();
      if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg.str());
      throw ValidationError(msg.str());
    }
    diag.run_id = traj.run_id;
    diag.window_index = static_cast<int>(w);
    diag.start_step = start;
    diag.end_step = end - 1;
    out.push_back(std::move(diag));
  }
  return out;
}

}  // namespace qdmd

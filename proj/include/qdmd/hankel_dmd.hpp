#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdmd/numeric_kernel.hpp"
#include "qdmd/quantile_embed.hpp"

namespace qdmd {

struct DmdConfig {
  int delays = 4;                 // q
  int modes = 10;                 // upper bound on retained modes
  double energy_threshold = 0.99;
  std::int64_t segment_steps = 500;
  double holdout_fraction = 0.2;
  double svd_rel_tol = kDefaultSvdRelTol;

  void validate() const;
};

struct WindowDiagnostics {
  std::string run_id;
  int window_index = 0;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;  // inclusive
  // Retained eigenvalues, min(r_eff, modes) of them. Never padded.
  std::vector<std::complex<double>> eigenvalues;
  int r_eff = 1;
  double residual = 0.0;
  double holdout_rr = 0.0;
  double persistence_rr = 0.0;
  // All-zero window: residual reported as 0 and no eigenvalues retained.
  bool degenerate = false;

  bool operator==(const WindowDiagnostics&) const = default;
};

struct WindowCalibration {
  double holdout_rr = 0.0;
  double persistence_rr = 0.0;
  double gain = 0.0;  // persistence_rr - holdout_rr
};

// Stacks q consecutive columns of `z` (one column per time point) into delay
// vectors; column t of the result is (z_t, ..., z_{t+q-1}).
DenseMatrix delay_embed(const DenseMatrix& z, int q);

// Column-per-point matrix of a window of quantile vectors.
DenseMatrix stack_points(std::span<const QuantileVector> window);

// Smallest r whose leading squared singular values reach `threshold` of the
// total energy. Returns 1 for an all-zero spectrum.
int effective_rank(const Eigen::VectorXd& sigma, double threshold);

// Full windowed diagnostic: spectrum, effective rank, reconstruction residual
// and holdout/persistence calibration. start/end steps are left at zero for
// matrix input; diagnose_run fills them in.
WindowDiagnostics fit_window(const DenseMatrix& z, const DmdConfig& cfg);
WindowDiagnostics fit_window(std::span<const QuantileVector> window,
                             const DmdConfig& cfg);

WindowCalibration calibrate_window(const DenseMatrix& z, const DmdConfig& cfg);
WindowCalibration calibrate_window(std::span<const QuantileVector> window,
                                   const DmdConfig& cfg);

// Non-overlapping windows of cfg.segment_steps training steps starting at the
// first recorded step; a trailing partial segment is dropped.
std::vector<WindowDiagnostics> diagnose_run(const QuantileTrajectory& traj,
                                            const DmdConfig& cfg);

}  // namespace qdmd

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/hankel_dmd.hpp"
#include "qdmd/synthetic_gen.hpp"

using namespace qdmd;

namespace {

DenseMatrix noisy_system(std::uint64_t seed, int steps = 60) {
  SynthSpec spec;
  spec.kind = SynthKind::linear_system;
  spec.eigenvalues = {std::polar(0.97, 0.4), std::polar(0.97, -0.4), 0.8};
  spec.dim = 5;
  spec.level = 1.0;
  spec.noise_sigma = 0.05;
  spec.steps = steps;
  spec.seed = seed;
  const auto r = generate(spec);
  DenseMatrix z(5, steps);
  for (int t = 0; t < steps; ++t) {
    z.col(t) = Eigen::Map<const Eigen::VectorXd>(r.trajectory.points[t].values.data(), 5);
  }
  return z;
}

QuantileTrajectory trajectory_every(std::int64_t every, std::int64_t max_steps) {
  QuantileTrajectory traj;
  traj.run_id = "run-a";
  traj.grid = QuantileGrid({0.25, 0.5, 0.75});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  double x = 1.0;
  for (std::int64_t s = 0; s < max_steps; s += every) {
    x = 0.95 * x + g(rng);
    traj.points.push_back({s, {x - 1.0, x, x + 1.0}});
  }
  return traj;
}

}  // namespace

TEST_CASE("delay_embed shapes") {
  DenseMatrix z(2, 5);
  z << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  CHECK(delay_embed(z, 1) == z);
  const auto xi = delay_embed(z, 2);
  CHECK(xi.rows() == 4);
  CHECK(xi.cols() == 4);
  CHECK(xi.col(0) == Eigen::Vector4d(1, 6, 2, 7));
  CHECK(xi.col(3) == Eigen::Vector4d(4, 9, 5, 10));

  const DenseMatrix c = DenseMatrix::Constant(3, 6, 2.5);
  const auto xc = delay_embed(c, 3);
  for (Eigen::Index t = 1; t < xc.cols(); ++t) CHECK(xc.col(t) == xc.col(0));
  CHECK_THROWS_AS(delay_embed(z, 6), ValidationError);
}

TEST_CASE("constant window is a fixed point") {
  DmdConfig cfg;
  const DenseMatrix z = DenseMatrix::Constant(19, 50, -2.0);
  const auto w = fit_window(z, cfg);
  CHECK(w.residual < 1e-12);
  CHECK(w.r_eff == 1);
  CHECK(w.persistence_rr == 0.0);
  CHECK(w.holdout_rr == 0.0);
  CHECK_FALSE(w.degenerate);
  const auto cal = calibrate_window(z, cfg);
  CHECK(cal.holdout_rr == 0.0);
  CHECK(cal.persistence_rr == 0.0);
  CHECK(cal.gain == 0.0);
}

TEST_CASE("all-zero window is flagged degenerate") {
  const auto w = fit_window(DenseMatrix::Zero(4, 20), DmdConfig{});
  CHECK(w.degenerate);
  CHECK(w.residual == 0.0);
  CHECK(w.eigenvalues.empty());
}

TEST_CASE("geometric scalar signal recovers its ratio") {
  DmdConfig cfg;
  cfg.delays = 2;
  DenseMatrix z(1, 30);
  for (int t = 0; t < 30; ++t) z(0, t) = std::pow(0.8, t);
  const auto w = fit_window(z, cfg);
  REQUIRE_FALSE(w.eigenvalues.empty());
  double best = INFINITY;
  for (auto l : w.eigenvalues) best = std::min(best, std::abs(l - 0.8));
  CHECK(best < 1e-6);
  CHECK(w.residual < 1e-8);
}

TEST_CASE("planted two-mode system is recovered") {
  SynthSpec spec;
  spec.eigenvalues = {0.9, 0.6};
  spec.dim = 2;
  spec.steps = 40;
  spec.seed = 3;
  const auto r = generate(spec);
  DmdConfig cfg;
  const auto w = fit_window(std::span<const QuantileVector>(r.trajectory.points), cfg);
  REQUIRE(w.eigenvalues.size() == 2);
  CHECK(oracle::spectral_distance(w.eigenvalues, {0.9, 0.6}) < 1e-6);
  CHECK(w.residual < 1e-8);
  CHECK(w.start_step == 0);
  CHECK(w.end_step == 39);
}

TEST_CASE("ramp is predicted exactly while persistence is not") {
  DmdConfig cfg;
  cfg.delays = 2;
  DenseMatrix z(1, 20);
  for (int t = 0; t < 20; ++t) z(0, t) = t;
  const auto cal = calibrate_window(z, cfg);
  CHECK(cal.holdout_rr < 1e-8);
  CHECK(cal.persistence_rr > 0.0);
  CHECK(cal.gain > 0.0);
}

TEST_CASE("residual is invariant to rotation and scaling of the window") {
  DmdConfig cfg;
  const auto z = noisy_system(17);
  const auto base = fit_window(z, cfg);
  CHECK(base.residual > 1e-6);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix m(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) m(i, j) = g(rng);
  }
  const Eigen::HouseholderQR<DenseMatrix> qr(m);
  const DenseMatrix q = qr.householderQ();
  CHECK(fit_window(DenseMatrix(q * z), cfg).residual ==
        doctest::Approx(base.residual).epsilon(1e-8));
  CHECK(fit_window(DenseMatrix(-3.0 * z), cfg).residual ==
        doctest::Approx(base.residual).epsilon(1e-8));
}

TEST_CASE("effective rank") {
  Eigen::VectorXd s(4);
  s << 10, 3, 1, 0.1;
  const double total = 100 + 9 + 1 + 0.01;
  CHECK(effective_rank(s, 100.0 / total) == 1);
  CHECK(effective_rank(s, 0.99) == 2);
  CHECK(effective_rank(s, 0.9999) == 3);
  CHECK(effective_rank(s, 1.0) == 4);
  CHECK(effective_rank(Eigen::VectorXd::Zero(3), 0.99) == 1);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto z = noisy_system(seed);
    DmdConfig lo, hi;
    lo.energy_threshold = 0.95;
    hi.energy_threshold = 0.99;
    const auto a = fit_window(z, lo);
    const auto b = fit_window(z, hi);
    CHECK(a.r_eff <= b.r_eff);
    CHECK(b.r_eff >= 1);
    CHECK(b.r_eff <= std::min<int>(5 * hi.delays, 60));
    CHECK(b.eigenvalues.size() == static_cast<std::size_t>(std::min(b.r_eff, hi.modes)));
  }
}

TEST_CASE("retained eigenvalues come in conjugate pairs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = fit_window(noisy_system(seed), DmdConfig{});
    for (std::size_t i = 0; i < w.eigenvalues.size(); ++i) {
      if (w.eigenvalues[i].imag() > 0.0) {
        REQUIRE(i + 1 < w.eigenvalues.size());
        CHECK(w.eigenvalues[i + 1] == std::conj(w.eigenvalues[i]));
      }
    }
  }
}

TEST_CASE("noiseless linear windows never lose to persistence") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.3, 0.98);
  for (int trial = 0; trial < 30; ++trial) {
    SynthSpec spec;
    const double radius = u(rng), angle = 0.5 * u(rng);
    spec.eigenvalues = {std::polar(radius, angle), std::polar(radius, -angle), u(rng)};
    spec.dim = 4;
    spec.level = 2.0;
    spec.steps = 50;
    spec.seed = trial;
    const auto r = generate(spec);
    const auto cal = calibrate_window(std::span<const QuantileVector>(r.trajectory.points),
                                      DmdConfig{});
    CHECK(cal.gain >= 0.0);
    CHECK(cal.holdout_rr < 1e-8);
  }
}

TEST_CASE("window too short for the holdout split or embedding") {
  DmdConfig cfg;
  CHECK_THROWS_AS(fit_window(DenseMatrix::Ones(2, 5), cfg), ValidationError);
  CHECK_NOTHROW(fit_window(DenseMatrix::Ones(2, 6), cfg));
}

TEST_CASE("diagnose_run window counts") {
  DmdConfig cfg;
  CHECK(diagnose_run(trajectory_every(2, 6000), cfg).size() == 12);
  cfg.segment_steps = 1000;
  CHECK(diagnose_run(trajectory_every(2, 6000), cfg).size() == 6);
  cfg.segment_steps = 500;
  CHECK_THROWS_AS(diagnose_run(trajectory_every(1, 499), cfg), ValidationError);
  // A trailing partial segment is dropped.
  CHECK(diagnose_run(trajectory_every(10, 1400), cfg).size() == 2);
}

TEST_CASE("diagnose_run window bounds and identity") {
  const auto diags = diagnose_run(trajectory_every(10, 2000), DmdConfig{});
  REQUIRE(diags.size() == 4);
  for (int w = 0; w < 4; ++w) {
    CHECK(diags[w].run_id == "run-a");
    CHECK(diags[w].window_index == w);
    CHECK(diags[w].start_step == 500 * w);
    CHECK(diags[w].end_step == 500 * w + 499);
  }
}

TEST_CASE("diagnose_run names run and window when a window is too sparse") {
  auto traj = trajectory_every(10, 1500);
  // Thin out the second window to three points.
  std::vector<QuantileVector> kept;
  for (const auto& p : traj.points) {
    if (p.step < 500 || p.step % 200 == 0) kept.push_back(p);
  }
  traj.points = kept;
  try {
    diagnose_run(traj, DmdConfig{});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("run-a") != std::string::npos);
    CHECK(msg.find("window 1") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  DmdConfig cfg;
  cfg.delays = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.modes = 65;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.energy_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.holdout_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

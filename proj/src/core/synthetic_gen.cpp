#include "qdmd/synthetic_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qdmd/errors.hpp"
#include "qdmd/random.hpp"

namespace qdmd {

namespace {

// Real block-diagonal matrix with the requested spectrum: 1x1 blocks for real
// eigenvalues, [[a, -b], [b, a]] rotation-scaling blocks for a +/- ib.
DenseMatrix block_operator(const std::vector<std::complex<double>>& eig) {
  const auto n = static_cast<Eigen::Index>(eig.size());
  DenseMatrix b = DenseMatrix::Zero(n, n);
  std::vector<bool> used(eig.size(), false);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < eig.size(); ++i) {
    if (used[i]) continue;
    const auto l = eig[i];
    if (!std::isfinite(l.real()) || !std::isfinite(l.imag())) {
      throw ValidationError("synth: non-finite eigenvalue");
    }
    used[i] = true;
    if (l.imag() == 0.0) {
      b(at, at) = l.real();
      at += 1;
      continue;
    }
    std::size_t partner = eig.size();
    for (std::size_t j = i + 1; j < eig.size(); ++j) {
      if (!used[j] && std::abs(eig[j] - std::conj(l)) <= 1e-12 * std::max(1.0, std::abs(l))) {
        partner = j;
        break;
      }
    }
    if (partner == eig.size()) {
      throw ValidationError("synth: complex eigenvalue without its conjugate (to within 1e-12)");
    }
    used[partner] = true;
    const double a = l.real(), im = std::abs(l.imag());
    b(at, at) = a;
    b(at, at + 1) = -im;
    b(at + 1, at) = im;
    b(at + 1, at + 1) = a;
    at += 2;
  }
  return b;
}

DenseMatrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  Eigen::HouseholderQR<DenseMatrix> qr(m);
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(rows, cols);
  return q;
}

Eigen::VectorXd level_vector(int d, double level) {
  Eigen::VectorXd c(d);
  for (int k = 0; k < d; ++k) c(k) = level * (1.0 + static_cast<double>(k) / d);
  return c;
}

void validate(const SynthSpec& spec) {
  if (spec.steps < 1) throw ValidationError("synth: steps must be >= 1");
  if (spec.dim < 1) throw ValidationError("synth: dim must be >= 1");
  if (spec.record_every < 1) throw ValidationError("synth: record_every must be >= 1");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw ValidationError("synth: noise_sigma must be finite and >= 0");
  }
  const bool linear =
      spec.kind == SynthKind::linear_system || spec.kind == SynthKind::regime_switch;
  if (linear) {
    if (spec.eigenvalues.empty()) throw ValidationError("synth: eigenvalues required");
    if (spec.eigenvalues.size() > static_cast<std::size_t>(spec.dim)) {
      throw ValidationError("synth: more eigenvalues than dimensions");
    }
  }
  if (spec.kind == SynthKind::regime_switch && !spec.eigenvalues_after.empty() &&
      spec.eigenvalues_after.size() != spec.eigenvalues.size()) {
    throw ValidationError("synth: eigenvalues_after must match eigenvalues in size");
  }
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  validate(spec);
  const int d = spec.dim;
  const Eigen::Index n_pts = spec.steps;
  SynthResult out;
  out.trajectory.run_id = "synthetic";
  out.trajectory.grid = QuantileGrid(std::vector<double>(
      [d] {
        std::vector<double> levels;
        for (int k = 1; k <= d; ++k) levels.push_back(static_cast<double>(k) / (d + 1));
        return levels;
      }()));
  out.clean = DenseMatrix::Zero(d, n_pts);

  const double level = spec.kind == SynthKind::constant && spec.level == 0.0 ? 1.0 : spec.level;
  const Eigen::VectorXd c_before = level_vector(d, level);
  Eigen::VectorXd c_after = c_before;
  out.operator_before = DenseMatrix::Zero(d, d);
  out.operator_after = DenseMatrix::Zero(d, d);

  switch (spec.kind) {
    case SynthKind::constant:
      for (Eigen::Index t = 0; t < n_pts; ++t) out.clean.col(t) = c_before;
      out.operator_before = DenseMatrix::Identity(d, d);
      out.operator_after = out.operator_before;
      break;
    case SynthKind::random_walk: {
      auto rng = substream(spec.seed, "walk");
      std::normal_distribution<double> g(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
      Eigen::VectorXd z = c_before;
      for (Eigen::Index t = 0; t < n_pts; ++t) {
        out.clean.col(t) = z;
        for (int k = 0; k < d; ++k) z(k) += g(rng);
      }
      out.operator_before = DenseMatrix::Identity(d, d);
      out.operator_after = out.operator_before;
      break;
    }
    case SynthKind::linear_system:
    case SynthKind::regime_switch: {
      const bool switching = spec.kind == SynthKind::regime_switch;
      std::vector<std::complex<double>> after = spec.eigenvalues_after;
      if (after.empty()) {
        for (const auto& l : spec.eigenvalues) after.push_back(0.8 * l);
      }
      const DenseMatrix b1 = block_operator(spec.eigenvalues);
      const DenseMatrix b2 = switching ? block_operator(after) : b1;
      const auto n = b1.rows();
      auto mix_rng = substream(spec.seed, "mixing");
      const DenseMatrix mix = random_orthonormal(d, n, mix_rng);
      out.operator_before = mix * b1 * mix.transpose();
      out.operator_after = mix * b2 * mix.transpose();

      if (switching) {
        auto shift_rng = substream(spec.seed, "switch");
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd u(d);
        for (int k = 0; k < d; ++k) u(k) = g(shift_rng);
        u.normalize();
        const double scale = c_before.norm() > 0.0 ? c_before.norm() : std::sqrt(static_cast<double>(d));
        c_after = c_before + spec.switch_magnitude * scale * u;
      }

      Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
      for (Eigen::Index t = 0; t < n_pts; ++t) {
        const bool late = switching && t * spec.record_every >= spec.switch_step;
        out.clean.col(t) = (late ? c_after : c_before) + mix * x;
        const bool next_late = switching && (t + 1) * spec.record_every >= spec.switch_step;
        x = (next_late ? b2 : b1) * x;
      }
      break;
    }
  }
  out.offset_before = c_before;
  out.offset_after = c_after;

  DenseMatrix observed = out.clean;
  if (spec.noise_sigma > 0.0 && spec.kind != SynthKind::random_walk) {
    auto rng = substream(spec.seed, "noise");
    std::normal_distribution<double> g(0.0, spec.noise_sigma);
    for (Eigen::Index t = 0; t < n_pts; ++t) {
      for (int k = 0; k < d; ++k) observed(k, t) += g(rng);
    }
  }
  out.trajectory.points.reserve(static_cast<std::size_t>(n_pts));
  for (Eigen::Index t = 0; t < n_pts; ++t) {
    QuantileVector p;
    p.step = t * spec.record_every;
    p.values.assign(observed.col(t).data(), observed.col(t).data() + d);
    out.trajectory.points.push_back(std::move(p));
  }
  return out;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RunRecord synth_run(const std::string& id, bool grokking, std::uint64_t run_seed,
                    const PoolShape& shape) {
  auto rng = substream(run_seed, "run");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };

  RunRecord run;
  run.run_id = id;
  run.meta.seed = static_cast<std::int64_t>(run_seed & 0x7fffffffULL);
  run.meta.weight_decay = grokking ? 1.0 : 0.0;
  run.meta.task = "synthetic";

  const int m = shape.probe_size;
  std::vector<double> probe(m), probe_post(m), flip(m);
  for (auto& e : probe) e = gauss(rng);
  for (auto& e : probe_post) e = gauss(rng);

  const double m_base = -3.0 + between(-0.5, 0.5);
  const double s_base = 0.8 + between(-0.1, 0.1);
  const double omega = between(0.02, 0.06);
  const double damping = 0.995;
  const double m_post = -0.3 + between(-0.05, 0.05);
  const double s_post = 0.1;

  const double switch_step = between(2000.0, 3200.0);
  const double spread = between(600.0, 1000.0);
  const double lag = between(100.0, 300.0);
  constexpr double flip_width = 25.0;
  for (auto& f : flip) f = switch_step + spread * unif(rng);
  std::vector<double> test_flip(200);
  for (auto& f : test_flip) f = switch_step + lag + spread * unif(rng);

  double x1 = between(0.5, 1.0), x2 = 0.0;
  for (std::int64_t step = 0; step < shape.max_steps; step += shape.record_every) {
    const double mean = m_base + 0.15 * x1;
    const double scale = s_base * (1.0 + 0.05 * x2);
    ObservableRecord rec{id, step, std::vector<double>(m)};
    for (int i = 0; i < m; ++i) {
      double o = mean + scale * probe[i];
      if (grokking) {
        const double w = logistic((static_cast<double>(step) - flip[i]) / flip_width);
        o += w * shape.switch_magnitude * (m_post + s_post * probe_post[i] - o);
      }
      rec.samples[i] = o * (1.0 + 0.005 * gauss(rng));
    }
    run.observable.push_back(std::move(rec));
    const double c = damping * std::cos(omega), s = damping * std::sin(omega);
    const double nx1 = c * x1 - s * x2 + 0.01 * gauss(rng);
    const double nx2 = s * x1 + c * x2 + 0.01 * gauss(rng);
    x1 = nx1;
    x2 = nx2;
  }

  const double acc0 = between(0.02, 0.08);
  const double norm0 = 40.0 + between(-2.0, 2.0);
  for (std::int64_t step = 0; step < shape.max_steps; step += shape.aux_every) {
    const auto t = static_cast<double>(step);
    double acc;
    double norm = norm0 + 10.0 * (1.0 - std::exp(-t / 800.0));
    if (grokking) {
      double frac = 0.0;
      for (double f : test_flip) frac += logistic((t - f) / flip_width);
      frac /= static_cast<double>(test_flip.size());
      acc = acc0 + (1.0 - acc0) * frac;
      norm -= 15.0 * logistic((t - (switch_step + spread / 2.0)) / 200.0);
    } else {
      acc = acc0 + 0.2 * (1.0 - std::exp(-t / 3000.0));
      norm += 0.0005 * t;
    }
    acc = std::clamp(acc + 0.002 * gauss(rng), 0.0, 1.0);
    run.test_acc.push_back({step, acc});
    run.aux_signals["norm_total"].push_back({step, norm});
  }
  return run;
}

}  // namespace

std::vector<RunRecord> grok_like_pool(int n_grok, int n_non, std::uint64_t seed,
                                      const PoolShape& shape) {
  if (n_grok < 0 || n_non < 0) throw ValidationError("synth: negative pool size");
  if (shape.max_steps < 1 || shape.record_every < 1 || shape.aux_every < 1 ||
      shape.probe_size < 1 || !(shape.switch_magnitude > 0.0 && shape.switch_magnitude <= 1.0)) {
    throw ValidationError("synth: invalid pool shape");
  }
  std::vector<RunRecord> pool;
  char id[32];
  for (int i = 0; i < n_grok; ++i) {
    std::snprintf(id, sizeof id, "grok-%03d", i);
    pool.push_back(synth_run(id, true, substream(seed, "pool/grok", static_cast<std::uint64_t>(i))(), shape));
  }
  for (int i = 0; i < n_non; ++i) {
    std::snprintf(id, sizeof id, "non-%03d", i);
    pool.push_back(synth_run(id, false, substream(seed, "pool/non", static_cast<std::uint64_t>(i))(), shape));
  }
  return pool;
}

}  // namespace qdmd

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "process.hpp"
#include "qdmd/alarm_rules.hpp"
#include "qdmd/detection_eval.hpp"
#include "qdmd/hankel_dmd.hpp"
#include "qdmd/pipeline.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/spectral_compare.hpp"
#include "qdmd/synthetic_gen.hpp"
#include "temp_dir.hpp"

using namespace qdmd;
using cplx = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- spectrum recovery ------------------------------------------------------

Outcome spectrum_recovery() {
  const auto t0 = Clock::now();
  const std::vector<std::vector<cplx>> planted = {
      {0.9, 0.6}, {std::polar(0.95, 0.3), std::conj(std::polar(0.95, 0.3))}};
  double worst_dist = 0.0, worst_res = 0.0;
  bool sizes_ok = true;
  for (const auto& lambda : planted) {
    SynthSpec spec;
    spec.eigenvalues = lambda;
    spec.dim = 2;
    spec.steps = 40;
    spec.seed = 1;
    const auto r = generate(spec);
    const auto w = fit_window(std::span<const QuantileVector>(r.trajectory.points), DmdConfig{});
    if (w.eigenvalues.size() != lambda.size()) {
      sizes_ok = false;
      continue;
    }
    worst_dist = std::max(worst_dist, spectral_distance(w.eigenvalues, lambda));
    worst_res = std::max(worst_res, w.residual);
  }
  const double secs = seconds_since(t0);
  return {sizes_ok && worst_dist <= 1e-6 && worst_res <= 1e-8 && secs < 1.0,
          fmt("max distance %.2e, max residual %.2e, %.3f s%s", worst_dist, worst_res, secs,
              sizes_ok ? "" : ", wrong mode count")};
}

// --- transition localization ------------------------------------------------

// Smallest switch magnitude (multiple of the level-vector norm) the
// localization guarantee is stated for.
constexpr double kSwitchFloor = 2.0;
constexpr double kNoiseFraction = 0.10;

// Before the switch: an undamped rotation around the level vector. After: the
// damped spectrum 0.8 * lambda around a shifted level. The switch step is kept
// at least `delays` steps from either edge of its window; a switch on a window
// boundary leaves both neighbours as pure single-regime windows.
Outcome transition_localization() {
  const auto t0 = Clock::now();
  const int trials = 200;
  int hits = 0;
  DmdConfig cfg;
  cfg.segment_steps = 50;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(0x5eed0000 + trial);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SynthSpec spec;
    spec.kind = SynthKind::regime_switch;
    const cplx lambda = std::polar(1.0, 0.1 + 0.5 * u(rng));
    spec.eigenvalues = {lambda, std::conj(lambda)};
    spec.dim = 5;
    spec.steps = 200;
    spec.level = 1.0;
    spec.switch_magnitude = kSwitchFloor;
    const auto window = 1 + static_cast<std::int64_t>(u(rng) * 3.0);
    const auto offset = cfg.delays + static_cast<std::int64_t>(
                                         u(rng) * static_cast<double>(cfg.segment_steps -
                                                                      2 * cfg.delays));
    spec.switch_step = window * cfg.segment_steps + offset;
    spec.seed = 1000 + static_cast<std::uint64_t>(trial);

    // Noise scaled to the RMS of the noiseless pre-switch coordinates.
    const auto clean = generate(spec).clean.leftCols(spec.switch_step);
    spec.noise_sigma = kNoiseFraction * std::sqrt(clean.squaredNorm() / clean.size());
    const auto r = generate(spec);
    const auto diags = diagnose_run(r.trajectory, cfg);
    const auto top = std::max_element(diags.begin(), diags.end(), [](const auto& a, const auto& b) {
      return a.residual < b.residual;
    });
    if (top->start_step <= spec.switch_step && spec.switch_step <= top->end_step) ++hits;
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(hits) / trials;
  return {rate >= 0.95 && secs < 30.0,
          fmt("%d/%d localized (%.1f%%), magnitude %.1f, noise %.0f%% of pre-switch RMS, %.2f s",
              hits, trials, 100.0 * rate, kSwitchFloor, 100.0 * kNoiseFraction, secs)};
}

// --- persistence calibration ------------------------------------------------

Outcome persistence_calibration() {
  int nonneg = 0, zero_const = 0;
  const int n = 100;
  DmdConfig cfg;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(0xca11b000 + i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SynthSpec spec;
    const double rho = 0.5 + 0.49 * u(rng), omega = 0.05 + 1.0 * u(rng);
    spec.eigenvalues = {std::polar(rho, omega), std::conj(std::polar(rho, omega)),
                      0.3 + 0.69 * u(rng)};
    spec.dim = 4;
    spec.steps = 60;
    spec.level = 2.0 * u(rng);
    spec.seed = static_cast<std::uint64_t>(i);
    const auto r = generate(spec);
    const auto cal = calibrate_window(std::span<const QuantileVector>(r.trajectory.points), cfg);
    if (cal.gain >= 0.0) ++nonneg;

    SynthSpec flat;
    flat.kind = SynthKind::constant;
    flat.level = 0.1 + 5.0 * u(rng);
    flat.dim = 4;
    flat.steps = 60;
    const auto c = generate(flat);
    const auto cc = calibrate_window(std::span<const QuantileVector>(c.trajectory.points), cfg);
    if (cc.holdout_rr == 0.0 && cc.persistence_rr == 0.0) ++zero_const;
  }
  return {nonneg == n && zero_const == n,
          fmt("gain >= 0 in %d/%d windows, constant windows exact zero in %d/%d", nonneg, n,
              zero_const, n)};
}

// --- exact intervals --------------------------------------------------------

Outcome exact_intervals() {
  const auto t0 = Clock::now();
  const Interval a = binom_interval(4, 5, 0.95);
  const Interval b = binom_interval(6, 12, 0.95);
  const double secs = seconds_since(t0);
  const double err = std::max({std::abs(a.lo - 0.284), std::abs(a.hi - 0.995),
                               std::abs(b.lo - 0.211), std::abs(b.hi - 0.789)});
  return {err <= 0.001 && secs < 1e-3,
          fmt("4/5 -> [%.4f, %.4f], 6/12 -> [%.4f, %.4f], max error %.1e, %.0f us", a.lo, a.hi,
              b.lo, b.hi, err, secs * 1e6)};
}

// --- ranking metrics --------------------------------------------------------

std::vector<RunScore> make_scores(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<RunScore> out;
  for (double p : pos) out.push_back({"p", {RunKind::grok, 100}, p, {}, {}});
  for (double n : neg) out.push_back({"n", {RunKind::non_grok, {}}, n, {}, {}});
  return out;
}

Outcome ranking_metrics() {
  std::mt19937_64 rng(0xa0c);
  double worst = 0.0;
  for (int pool = 0; pool < 1000; ++pool) {
    const int size = std::uniform_int_distribution<int>(2, 12)(rng);
    const int n_pos = std::uniform_int_distribution<int>(1, size - 1)(rng);
    // Coarse scores on half the pools so ties occur.
    const bool coarse = pool % 2 == 0;
    auto draw = [&] {
      return coarse ? static_cast<double>(std::uniform_int_distribution<int>(0, 4)(rng))
                    : std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    };
    std::vector<double> pos, neg;
    for (int i = 0; i < size; ++i) (i < n_pos ? pos : neg).push_back(draw());
    const auto scores = make_scores(pos, neg);
    worst = std::max(worst, std::abs(auroc(scores) - oracle::auroc_pairs(pos, neg)));
  }

  // Staircases worked out by hand.
  struct Fixture {
    std::vector<double> pos, neg;
    double ap;
  };
  const std::vector<Fixture> fixtures = {
      {{3, 1}, {2}, (1.0 + 2.0 / 3.0) / 2.0},
      {{0.9, 0.8}, {0.1}, 1.0},
      {{0.1}, {0.9, 0.8}, 1.0 / 3.0},
      {{0.5}, {0.5}, 0.5},
      {{5, 3, 3}, {4, 3, 1}, 1.0 / 3.0 + (3.0 / 5.0) * (2.0 / 3.0)},
      {{2, 2}, {2, 2}, 0.5},
      {{4, 2}, {3, 1}, 0.5 * 1.0 + 0.5 * (2.0 / 3.0)},
  };
  int ap_ok = 0;
  for (const auto& f : fixtures) {
    if (std::abs(auprc(make_scores(f.pos, f.neg)) - f.ap) <= 1e-12) ++ap_ok;
  }
  const int nf = static_cast<int>(fixtures.size());
  return {worst <= 1e-12 && ap_ok == nf,
          fmt("AUROC max deviation %.1e over 1000 pools, AUPRC fixtures %d/%d", worst, ap_ok, nf)};
}

// --- W2 ---------------------------------------------------------------------

Outcome w2_oracle() {
  std::mt19937_64 rng(0x2a2);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int f = 0; f < 1000; ++f) {
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    std::vector<double> a(n), b(n);
    const double shift = 2.0 * g(rng);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = shift + 1.5 * g(rng);
    worst = std::max(worst, std::abs(w2_empirical(a, b) - oracle::w2_equal(a, b)));
  }
  return {worst <= 1e-9, fmt("max deviation %.1e over 1000 fixtures", worst)};
}

// --- shuffle control ----------------------------------------------------------

Outcome shuffle_exactness() {
  std::mt19937_64 rng(0x5f1);
  std::normal_distribution<double> g(0.0, 0.5);
  double worst_mc = 0.0;
  int exact_ok = 0, cases = 0;
  for (int k = 1; k <= 3; ++k) {
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<cplx> a(k), b(k);
      for (auto& x : a) x = {g(rng), g(rng)};
      for (auto& x : b) x = {g(rng) + 0.3, g(rng)};
      const double truth = oracle::shuffle_exceedance(a, b);
      const auto mc = shuffle_control(a, b, 100000, 17 + rep, false);
      const auto ex = shuffle_control(a, b, 0, 0, true);
      worst_mc = std::max(worst_mc, std::abs(mc.exceedance - truth));
      ++cases;
      if (ex.exceedance == truth && ex.n_shuffles == (std::int64_t{1} << k)) ++exact_ok;
    }
  }
  return {worst_mc <= 0.01 && exact_ok == cases,
          fmt("Monte Carlo max deviation %.4f, exact mode identical %d/%d", worst_mc, exact_ok,
              cases)};
}

// --- alarm monotonicity -------------------------------------------------------

bool no_later(const AlarmEvent& earlier, const AlarmEvent& later) {
  if (!later.fired) return true;
  return earlier.fired && *earlier.alarm_step <= *later.alarm_step;
}

Outcome alarm_monotonicity() {
  std::mt19937_64 rng(0xa1a);
  std::lognormal_distribution<double> base(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int s = 0; s < 1000; ++s) {
    const int n = std::uniform_int_distribution<int>(4, 30)(rng);
    std::vector<SignalPoint> trace(n);
    for (int i = 0; i < n; ++i) {
      const double spike = u(rng) < 0.2 ? 5.0 + 30.0 * u(rng) : 1.0;
      trace[i] = {100 * (i + 1), 0.01 * base(rng) * spike};
    }
    AlarmConfig cfg;
    cfg.baseline_windows = std::uniform_int_distribution<int>(1, 3)(rng);
    const double t1 = 1.0 + 20.0 * u(rng), t2 = t1 + 20.0 * u(rng);
    const int k1 = std::uniform_int_distribution<int>(1, 4)(rng);
    const int k2 = k1 + std::uniform_int_distribution<int>(0, 3)(rng);

    cfg.k = k1;
    cfg.tau = t1;
    const auto a = evaluate_alarm(trace, cfg);
    cfg.tau = t2;
    const auto b = evaluate_alarm(trace, cfg);
    if (!no_later(a, b)) ++violations;

    cfg.tau = t1;
    cfg.k = k2;
    const auto c = evaluate_alarm(trace, cfg);
    if (!no_later(a, c)) ++violations;

    cfg.k = 1;
    const auto sustained = evaluate_alarm(trace, cfg);
    cfg.rule = AlarmRule::instantaneous;
    cfg.k = k2;
    const auto inst = evaluate_alarm(trace, cfg);
    if (!(sustained == inst)) ++violations;
  }
  return {violations == 0, fmt("%d violations over 1000 sequences", violations)};
}

// --- end-to-end determinism ---------------------------------------------------

std::vector<std::string> run_workflow(const TempDir& tmp, const std::string& tag, int threads) {
  using testing_support::quote;
  using testing_support::run_cli;
  const auto dir = tmp / tag;
  std::filesystem::create_directories(dir);
  const std::string g = "--threads " + std::to_string(threads) + " ";
  const auto runs = (dir / "runs").string();
  const auto q = (dir / "q.csv").string();
  const auto d = (dir / "diag.csv").string();
  const auto a = (dir / "alarm.json").string();
  const auto e = (dir / "eval.json").string();
  const std::vector<std::string> steps = {
      g + "synth --output " + quote(runs),
      g + "embed --input " + quote(runs) + " --output " + quote(q),
      g + "dmd --input " + quote(runs) + " --output " + quote(d),
      g + "alarm --diagnostics " + quote(d) + " --output " + quote(a),
      g + "evaluate --runs " + quote(runs) + " --diagnostics " + quote(d) + " --output " + quote(e),
  };
  for (const auto& s : steps) {
    const auto r = run_cli(s, dir);
    if (r.exit_code != 0) return {"exit " + std::to_string(r.exit_code) + ": " + r.err};
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "runs")) {
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const char* name : {"q.csv", "diag.csv", "alarm.json", "eval.json"}) {
    files.push_back(dir / name);
  }
  std::vector<std::string> out;
  for (const auto& f : files) {
    out.push_back(f.filename().string() + "\n" + testing_support::slurp(f));
  }
  return out;
}

Outcome end_to_end_determinism() {
  TempDir tmp("accept-e2e");
  const auto a = run_workflow(tmp, "first", 1);
  const auto b = run_workflow(tmp, "second", 1);
  const auto c = run_workflow(tmp, "threaded", 8);
  const bool ran = a.size() > 1;
  return {ran && a == b && a == c,
          ran ? fmt("%zu files compared, repeat %s, threads 1 vs 8 %s", a.size(),
                    a == b ? "identical" : "DIFFERENT", a == c ? "identical" : "DIFFERENT")
              : "workflow failed: " + a.front()};
}

// --- synthetic detection ------------------------------------------------------

Outcome synthetic_detection() {
  ToolConfig cfg;
  const auto pool = grok_like_pool(5, 12, cfg.seed);
  const auto diags = diagnose_pool(pool, cfg);
  const auto rep = evaluate_report(pool, diags, cfg);
  const double auc = rep["auroc"].get<double>();
  const auto& ci = rep["intervals"]["auroc"];
  if (!ci.is_array()) return {false, fmt("AUROC %.3f, no bootstrap interval", auc)};
  const double lo = ci[0].get<double>(), hi = ci[1].get<double>();
  return {auc >= 0.95 && lo > 0.5, fmt("AUROC %.3f, bootstrap CI [%.3f, %.3f]", auc, lo, hi)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"spectrum recovery", spectrum_recovery},
      {"transition localization", transition_localization},
      {"persistence calibration", persistence_calibration},
      {"exact-interval reproduction", exact_intervals},
      {"ranking-metric oracles", ranking_metrics},
      {"1-D W2 oracle", w2_oracle},
      {"shuffle-control exactness", shuffle_exactness},
      {"alarm monotonicity", alarm_monotonicity},
      {"end-to-end determinism", end_to_end_determinism},
      {"synthetic detection sanity", synthetic_detection},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}

#include "qdmd/qdmd.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "qdmd/config.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/pipeline.hpp"
#include "qdmd/quantile_embed.hpp"
#include "qdmd/synthetic_gen.hpp"
#include "qdmd/trajectory_io.hpp"

struct qdmd_config {
  qdmd::ToolConfig value;
};

struct qdmd_pool {
  std::vector<qdmd::RunRecord> runs;
};

struct qdmd_diagnostics {
  std::vector<qdmd::WindowDiagnostics> windows;
};

namespace {

thread_local std::string last_error;

qdmd_status fail(qdmd_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
qdmd_status guarded(Fn&& fn) {
  try {
    fn();
    return QDMD_OK;
  } catch (const qdmd::ValidationError& e) {
    return fail(QDMD_ERROR_VALIDATION, e.what());
  } catch (const qdmd::IoError& e) {
    return fail(QDMD_ERROR_IO, e.what());
  } catch (const qdmd::NumericError& e) {
    return fail(QDMD_ERROR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(QDMD_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QDMD_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(QDMD_ERROR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const qdmd::ToolConfig& config_or_default(const qdmd_config* cfg) {
  static const qdmd::ToolConfig defaults;
  return cfg ? cfg->value : defaults;
}

int eigen_columns(const std::vector<qdmd::WindowDiagnostics>& diags, const qdmd::ToolConfig& cfg) {
  std::size_t k = static_cast<std::size_t>(cfg.dmd.modes);
  for (const auto& d : diags) k = std::max(k, d.eigenvalues.size());
  return static_cast<int>(k);
}

}  // namespace

#define QDMD_REQUIRE(cond, what) \
  if (!(cond)) return fail(QDMD_ERROR_INVALID_ARGUMENT, what)

extern "C" {

const char* qdmd_version(void) { return QDMD_VERSION_STRING; }

const char* qdmd_last_error(void) { return last_error.c_str(); }

void qdmd_string_free(char* s) { std::free(s); }

qdmd_status qdmd_config_new(qdmd_config** out) {
  QDMD_REQUIRE(out, "qdmd_config_new: null output");
  return guarded([&] { *out = new qdmd_config(); });
}

void qdmd_config_free(qdmd_config* cfg) { delete cfg; }

qdmd_status qdmd_config_load(qdmd_config* cfg, const char* path) {
  QDMD_REQUIRE(cfg && path, "qdmd_config_load: null argument");
  return guarded([&] {
    auto copy = cfg->value;
    copy.load_file(path);
    cfg->value = std::move(copy);
  });
}

qdmd_status qdmd_config_set(qdmd_config* cfg, const char* key, const char* value) {
  QDMD_REQUIRE(cfg && key && value, "qdmd_config_set: null argument");
  return guarded([&] {
    auto copy = cfg->value;
    copy.set(key, value);
    cfg->value = std::move(copy);
  });
}

qdmd_status qdmd_config_validate(const qdmd_config* cfg) {
  QDMD_REQUIRE(cfg, "qdmd_config_validate: null argument");
  return guarded([&] { cfg->value.validate(); });
}

qdmd_status qdmd_config_json(const qdmd_config* cfg, char** out_json) {
  QDMD_REQUIRE(cfg && out_json, "qdmd_config_json: null argument");
  return guarded([&] { *out_json = copy_string(qdmd::dump_report(cfg->value.to_json())); });
}

int qdmd_config_threads(const qdmd_config* cfg) { return cfg ? cfg->value.threads : 0; }

qdmd_status qdmd_pool_load(const char* path, qdmd_pool** out) {
  QDMD_REQUIRE(path && out, "qdmd_pool_load: null argument");
  return guarded([&] {
    auto pool = std::make_unique<qdmd_pool>();
    pool->runs = qdmd::load_runs(path);
    *out = pool.release();
  });
}

qdmd_status qdmd_pool_synthesize(const qdmd_config* cfg, qdmd_pool** out) {
  QDMD_REQUIRE(out, "qdmd_pool_synthesize: null output");
  return guarded([&] {
    const auto& c = config_or_default(cfg);
    auto pool = std::make_unique<qdmd_pool>();
    pool->runs = qdmd::grok_like_pool(c.synth.n_grok, c.synth.n_non, c.seed, c.synth.shape);
    *out = pool.release();
  });
}

qdmd_status qdmd_pool_write(const qdmd_pool* pool, const char* dir) {
  QDMD_REQUIRE(pool && dir, "qdmd_pool_write: null argument");
  return guarded([&] { qdmd::write_runs(pool->runs, dir); });
}

size_t qdmd_pool_size(const qdmd_pool* pool) { return pool ? pool->runs.size() : 0; }

const char* qdmd_pool_run_id(const qdmd_pool* pool, size_t index) {
  if (!pool || index >= pool->runs.size()) return nullptr;
  return pool->runs[index].run_id.c_str();
}

void qdmd_pool_free(qdmd_pool* pool) { delete pool; }

qdmd_status qdmd_embed_write(const qdmd_pool* pool, const qdmd_config* cfg,
                             const char* csv_path) {
  QDMD_REQUIRE(pool && csv_path, "qdmd_embed_write: null argument");
  return guarded([&] {
    const auto traj = qdmd::embed_pool(pool->runs, config_or_default(cfg));
    qdmd::write_quantile_csv(traj, csv_path);
  });
}

qdmd_status qdmd_diagnose(const qdmd_pool* pool, const qdmd_config* cfg,
                          qdmd_diagnostics** out) {
  QDMD_REQUIRE(pool && out, "qdmd_diagnose: null argument");
  return guarded([&] {
    auto d = std::make_unique<qdmd_diagnostics>();
    d->windows = qdmd::diagnose_pool(pool->runs, config_or_default(cfg));
    *out = d.release();
  });
}

qdmd_status qdmd_diagnostics_read(const char* path, qdmd_diagnostics** out) {
  QDMD_REQUIRE(path && out, "qdmd_diagnostics_read: null argument");
  return guarded([&] {
    auto d = std::make_unique<qdmd_diagnostics>();
    d->windows = qdmd::read_diagnostics(path);
    *out = d.release();
  });
}

qdmd_status qdmd_diagnostics_write(const qdmd_diagnostics* diags, const qdmd_config* cfg,
                                   const char* path) {
  QDMD_REQUIRE(diags && path, "qdmd_diagnostics_write: null argument");
  return guarded([&] {
    qdmd::write_diagnostics(diags->windows, path,
                            eigen_columns(diags->windows, config_or_default(cfg)));
  });
}

size_t qdmd_diagnostics_size(const qdmd_diagnostics* diags) {
  return diags ? diags->windows.size() : 0;
}

qdmd_status qdmd_diagnostics_window(const qdmd_diagnostics* diags, size_t index,
                                    qdmd_window_info* out) {
  QDMD_REQUIRE(diags && out, "qdmd_diagnostics_window: null argument");
  QDMD_REQUIRE(index < diags->windows.size(), "qdmd_diagnostics_window: index out of range");
  const auto& w = diags->windows[index];
  out->run_id = w.run_id.c_str();
  out->window_index = w.window_index;
  out->start_step = w.start_step;
  out->end_step = w.end_step;
  out->r_eff = w.r_eff;
  out->residual = w.residual;
  out->holdout_rr = w.holdout_rr;
  out->persistence_rr = w.persistence_rr;
  out->n_eigenvalues = w.eigenvalues.size();
  out->degenerate = w.degenerate ? 1 : 0;
  return QDMD_OK;
}

qdmd_status qdmd_diagnostics_eigenvalue(const qdmd_diagnostics* diags, size_t window,
                                        size_t index, double* re, double* im) {
  QDMD_REQUIRE(diags && re && im, "qdmd_diagnostics_eigenvalue: null argument");
  QDMD_REQUIRE(window < diags->windows.size(),
               "qdmd_diagnostics_eigenvalue: window out of range");
  const auto& ev = diags->windows[window].eigenvalues;
  QDMD_REQUIRE(index < ev.size(), "qdmd_diagnostics_eigenvalue: index out of range");
  *re = ev[index].real();
  *im = ev[index].imag();
  return QDMD_OK;
}

void qdmd_diagnostics_free(qdmd_diagnostics* diags) { delete diags; }

qdmd_status qdmd_alarm_report(const qdmd_diagnostics* diags, const qdmd_config* cfg,
                              char** out_json) {
  QDMD_REQUIRE(diags && out_json, "qdmd_alarm_report: null argument");
  return guarded([&] {
    *out_json = copy_string(
        qdmd::dump_report(qdmd::alarm_report(diags->windows, config_or_default(cfg))));
  });
}

qdmd_status qdmd_evaluate_report(const qdmd_pool* pool, const qdmd_diagnostics* diags,
                                 const qdmd_config* cfg, char** out_json) {
  QDMD_REQUIRE(pool && out_json, "qdmd_evaluate_report: null argument");
  return guarded([&] {
    static const std::vector<qdmd::WindowDiagnostics> none;
    const auto& windows = diags ? diags->windows : none;
    *out_json = copy_string(qdmd::dump_report(
        qdmd::evaluate_report(pool->runs, windows, config_or_default(cfg))));
  });
}

qdmd_status qdmd_compare_spectra(const qdmd_diagnostics* a, const char* run_a, int window_a,
                                 const qdmd_diagnostics* b, const char* run_b, int window_b,
                                 const qdmd_config* cfg, char** out_json) {
  QDMD_REQUIRE(a && run_a && run_b && out_json, "qdmd_compare_spectra: null argument");
  if (!b) b = a;
  return guarded([&] {
    const auto sa = qdmd::select_spectrum(a->windows, run_a, window_a);
    const auto sb = qdmd::select_spectrum(b->windows, run_b, window_b);
    *out_json =
        copy_string(qdmd::dump_report(qdmd::compare_report(sa, sb, config_or_default(cfg))));
  });
}

qdmd_status qdmd_empirical_quantiles(const double* samples, size_t n, const double* levels,
                                     size_t d, double* out) {
  QDMD_REQUIRE(out && (samples || n == 0) && (levels || d == 0),
               "qdmd_empirical_quantiles: null argument");
  return guarded([&] {
    const qdmd::QuantileGrid grid(std::vector<double>(levels, levels + d));
    const auto q = qdmd::empirical_quantiles(std::span<const double>(samples, n), grid);
    std::copy(q.begin(), q.end(), out);
  });
}

qdmd_status qdmd_w2_empirical(const double* a, size_t na, const double* b, size_t nb,
                              double* out) {
  QDMD_REQUIRE(out && (a || na == 0) && (b || nb == 0), "qdmd_w2_empirical: null argument");
  return guarded([&] {
    *out = qdmd::w2_empirical(std::span<const double>(a, na), std::span<const double>(b, nb));
  });
}

qdmd_status qdmd_binom_interval(int64_t successes, int64_t trials, double level, double* lo,
                                double* hi) {
  QDMD_REQUIRE(lo && hi, "qdmd_binom_interval: null argument");
  return guarded([&] {
    const auto iv = qdmd::binom_interval(successes, trials, level);
    *lo = iv.lo;
    *hi = iv.hi;
  });
}

}  // extern "C"

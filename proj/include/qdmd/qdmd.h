/*
 * C interface to the qdmd training-dynamics diagnostics library.
 *
 * All objects are opaque handles created by a *_new / *_load / *_read call
 * and released with the matching *_free. Every fallible call returns a
 * qdmd_status; on failure a description is available from qdmd_last_error()
 * on the same thread until the next failing call. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * qdmd_string_free().
 */
#ifndef QDMD_QDMD_H
#define QDMD_QDMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(QDMD_BUILDING_LIBRARY)
#define QDMD_API __attribute__((visibility("default")))
#else
#define QDMD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qdmd_status {
  QDMD_OK = 0,
  QDMD_ERROR_VALIDATION = 1,
  QDMD_ERROR_IO = 2,
  QDMD_ERROR_NUMERIC = 3,
  QDMD_ERROR_INVALID_ARGUMENT = 4,
  QDMD_ERROR_INTERNAL = 5
} qdmd_status;

typedef struct qdmd_config qdmd_config;
typedef struct qdmd_pool qdmd_pool;
typedef struct qdmd_diagnostics qdmd_diagnostics;

typedef struct qdmd_window_info {
  const char* run_id; /* valid while the diagnostics handle lives */
  int window_index;
  int64_t start_step;
  int64_t end_step;
  int r_eff;
  double residual;
  double holdout_rr;
  double persistence_rr;
  size_t n_eigenvalues;
  int degenerate;
} qdmd_window_info;

QDMD_API const char* qdmd_version(void);
QDMD_API const char* qdmd_last_error(void);
QDMD_API void qdmd_string_free(char* s);

/* Configuration. Keys are "section.name" (see ToolConfig). */
QDMD_API qdmd_status qdmd_config_new(qdmd_config** out);
QDMD_API void qdmd_config_free(qdmd_config* cfg);
QDMD_API qdmd_status qdmd_config_load(qdmd_config* cfg, const char* path);
/* Parses and stores one value; cross-field checks wait for qdmd_config_validate. */
QDMD_API qdmd_status qdmd_config_set(qdmd_config* cfg, const char* key, const char* value);
QDMD_API qdmd_status qdmd_config_validate(const qdmd_config* cfg);
QDMD_API qdmd_status qdmd_config_json(const qdmd_config* cfg, char** out_json);
QDMD_API int qdmd_config_threads(const qdmd_config* cfg);

/* Run pools. */
QDMD_API qdmd_status qdmd_pool_load(const char* path, qdmd_pool** out);
QDMD_API qdmd_status qdmd_pool_synthesize(const qdmd_config* cfg, qdmd_pool** out);
QDMD_API qdmd_status qdmd_pool_write(const qdmd_pool* pool, const char* dir);
QDMD_API size_t qdmd_pool_size(const qdmd_pool* pool);
QDMD_API const char* qdmd_pool_run_id(const qdmd_pool* pool, size_t index);
QDMD_API void qdmd_pool_free(qdmd_pool* pool);

/* Quantile embedding, written as run_id,step,q1..qd. */
QDMD_API qdmd_status qdmd_embed_write(const qdmd_pool* pool, const qdmd_config* cfg,
                                      const char* csv_path);

/* Windowed Hankel-DMD diagnostics. */
QDMD_API qdmd_status qdmd_diagnose(const qdmd_pool* pool, const qdmd_config* cfg,
                                   qdmd_diagnostics** out);
QDMD_API qdmd_status qdmd_diagnostics_read(const char* path, qdmd_diagnostics** out);
QDMD_API qdmd_status qdmd_diagnostics_write(const qdmd_diagnostics* diags,
                                            const qdmd_config* cfg, const char* path);
QDMD_API size_t qdmd_diagnostics_size(const qdmd_diagnostics* diags);
QDMD_API qdmd_status qdmd_diagnostics_window(const qdmd_diagnostics* diags, size_t index,
                                             qdmd_window_info* out);
QDMD_API qdmd_status qdmd_diagnostics_eigenvalue(const qdmd_diagnostics* diags,
                                                 size_t window, size_t index,
                                                 double* re, double* im);
QDMD_API void qdmd_diagnostics_free(qdmd_diagnostics* diags);

/* Reports, returned as JSON text. */
QDMD_API qdmd_status qdmd_alarm_report(const qdmd_diagnostics* diags,
                                       const qdmd_config* cfg, char** out_json);
QDMD_API qdmd_status qdmd_evaluate_report(const qdmd_pool* pool,
                                          const qdmd_diagnostics* diags,
                                          const qdmd_config* cfg, char** out_json);
/* b may be NULL when both windows come from the same diagnostics. */
QDMD_API qdmd_status qdmd_compare_spectra(const qdmd_diagnostics* a, const char* run_a,
                                          int window_a, const qdmd_diagnostics* b,
                                          const char* run_b, int window_b,
                                          const qdmd_config* cfg, char** out_json);

/* Stateless numerical entry points. */
QDMD_API qdmd_status qdmd_empirical_quantiles(const double* samples, size_t n,
                                              const double* levels, size_t d,
                                              double* out);
QDMD_API qdmd_status qdmd_w2_empirical(const double* a, size_t na, const double* b,
                                       size_t nb, double* out);
QDMD_API qdmd_status qdmd_binom_interval(int64_t successes, int64_t trials, double level,
                                         double* lo, double* hi);

#ifdef __cplusplus
}
#endif

#endif /* QDMD_QDMD_H */

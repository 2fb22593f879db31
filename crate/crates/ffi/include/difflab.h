#ifndef DIFFLAB_H
#define DIFFLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 and 3 agree with the command line exit codes.
 */
typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_ARGUMENT = 2,
  DL_STATUS_NUMERICAL_FAILURE = 3,
  DL_STATUS_IO = 4,
  DL_STATUS_PANIC = 5,
} DlStatus;

/**
 * A fitted estimator.
 */
typedef struct DlEstimate DlEstimate;

/**
 * A diffusivity field `f`.
 */
typedef struct DlField DlField;

/**
 * A discretely observed path `X_0, X_D, ..., X_{ND}`.
 */
typedef struct DlObservations DlObservations;

/**
 * Smoothness thresholds and rate sequences.
 */
typedef struct DlRates {
  uint32_t alpha_d;
  double s_star;
  double eps_n;
  double d_interval;
  double e_n;
  double v_n;
} DlRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dl_version(void);

/**
 * Builds a field from a truth description such as
 * `{"type":"bumps","base":1.0,"bumps":[{"center":[0.5],"radius":0.2,"amplitude":0.5}]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DlStatus dl_field_from_json(const char *json, struct DlField **out);

/**
 * # Safety
 * `field` must come from `dl_field_from_json` and not be used afterwards.
 */
void dl_field_free(struct DlField *field);

/**
 * Evaluates `f(x)` for a point of dimension `dim`.
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` to one double.
 */
enum DlStatus dl_field_value(const struct DlField *field, const double *x, size_t dim, double *out);

/**
 * Wraps caller-owned points (`count` points of dimension `dim`, row major)
 * sampled at spacing `d_interval`.
 *
 * # Safety
 * `points` must point to `count * dim` doubles.
 */
enum DlStatus dl_observations_new(size_t dim,
                                  double d_interval,
                                  const double *points,
                                  size_t count,
                                  struct DlObservations **out);

/**
 * Simulates `n` transitions of the reflected diffusion described by an
 * experiment configuration (JSON).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DlStatus dl_simulate(const char *config_json,
                          size_t n,
                          uint64_t seed,
                          struct DlObservations **out);

/**
 * Number of transitions `N` (the path holds `N + 1` points).
 *
 * # Safety
 * `obs` must be a live handle or null.
 */
size_t dl_observations_len(const struct DlObservations *obs);

/**
 * # Safety
 * `obs` must be a live handle or null.
 */
size_t dl_observations_dim(const struct DlObservations *obs);

/**
 * Copies the `(N + 1) * dim` coordinates into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum DlStatus dl_observations_copy(const struct DlObservations *obs, double *buf, size_t len);

/**
 * # Safety
 * `obs` must come from this library and not be used afterwards.
 */
void dl_observations_free(struct DlObservations *obs);

/**
 * Fits the truncated least-squares estimator. The configuration fixes the
 * domain, wavelet order, resolution rule and truncation level.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string, `obs` a live handle.
 */
enum DlStatus dl_estimate(const char *config_json,
                          const struct DlObservations *obs,
                          struct DlEstimate **out);

/**
 * Evaluates the estimate at `x`; `truncated != 0` selects `min(f̂, M)_+`.
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` to one double.
 */
enum DlStatus dl_estimate_value(const struct DlEstimate *est,
                                const double *x,
                                size_t dim,
                                int32_t truncated,
                                double *out);

/**
 * Writes the coarse and fine levels and the number of coefficients.
 *
 * # Safety
 * Output pointers must be valid; any of them may be null to skip it.
 */
enum DlStatus dl_estimate_info(const struct DlEstimate *est,
                               uint32_t *j0,
                               uint32_t *j,
                               size_t *coefficients);

/**
 * # Safety
 * `est` must come from `dl_estimate` and not be used afterwards.
 */
void dl_estimate_free(struct DlEstimate *est);

/**
 * Log proxy transition density `log q_{D,f}(x, y)`.
 *
 * # Safety
 * `x`, `y` must point to `dim` doubles and `out` to one double.
 */
enum DlStatus dl_log_q(const struct DlField *field,
                       double d_interval,
                       const double *x,
                       const double *y,
                       size_t dim,
                       double *out);

/**
 * Smoothness thresholds and rate sequences for dimension `d`, sampling
 * exponent `a`, smoothness `s` and sample size `n`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DlStatus dl_ratecalc(uint32_t d, double a, double s, double n, struct DlRates *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFLAB_H */

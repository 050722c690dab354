#ifndef CENSREG_H
#define CENSREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CensregStatus {
  CENSREG_STATUS_OK = 0,
  CENSREG_STATUS_NULL_POINTER = 1,
  CENSREG_STATUS_INVALID_INPUT = 2,
  CENSREG_STATUS_DIMENSION_MISMATCH = 3,
  CENSREG_STATUS_RANK_DEFICIENT = 4,
  CENSREG_STATUS_ALL_CENSORED = 5,
  CENSREG_STATUS_TOO_FEW_OBSERVATIONS = 6,
  CENSREG_STATUS_NUMERICAL = 7,
  CENSREG_STATUS_BUFFER_TOO_SMALL = 8,
  CENSREG_STATUS_PANIC = 9,
} CensregStatus;

typedef enum CensregEstimator {
  CENSREG_ESTIMATOR_LS = 0,
  CENSREG_ESTIMATOR_L1 = 1,
  CENSREG_ESTIMATOR_LMS = 2,
  CENSREG_ESTIMATOR_S = 3,
  CENSREG_ESTIMATOR_MM = 4,
  CENSREG_ESTIMATOR_TAU = 5,
  CENSREG_ESTIMATOR_M = 6,
  CENSREG_ESTIMATOR_GM = 7,
} CensregEstimator;

// Opaque fit handle.
typedef struct CensregFit CensregFit;

// Opaque sample handle.
typedef struct CensregSample CensregSample;

// Tuning; start from `censreg_options_default()`.
typedef struct CensregOptions {
  size_t n_candidates;
  uint64_t seed;
  double b_over_a;
  double c1;
  double c2;
  double c_tau;
  bool refine;
  bool prune;
  // Use the diagonal MAD scatter instead of the identity in the outer
  // criterion.
  bool mad_scatter;
} CensregOptions;

typedef struct CensregBreakdown {
  size_t q;
  size_t m;
  double k0;
  double gamma_bound;
  double optimal_bound;
  bool q_exact;
} CensregBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct CensregOptions censreg_options_default(void);

// NUL-terminated library version; static storage.
const char *censreg_version(void);

// Creates a sample from `n` responses, a row-major `n × p` design and `n`
// status bytes (nonzero = observed). With `has_intercept` the first design
// column must be all ones.
//
// # Safety
// `y` and `delta` must point to `n` readable elements, `x` to `n·p`, and
// `out` to writable storage for one pointer.
enum CensregStatus censreg_sample_new(const double *y,
                                      const double *x,
                                      const uint8_t *delta,
                                      size_t n,
                                      size_t p,
                                      bool has_intercept,
                                      struct CensregSample **out);

// # Safety
// `sample` must come from `censreg_sample_new` and not be freed twice.
void censreg_sample_free(struct CensregSample *sample);

// # Safety
// `sample` must be a live handle or null (returns 0).
size_t censreg_sample_n(const struct CensregSample *sample);

// # Safety
// `sample` must be a live handle or null (returns 0).
size_t censreg_sample_p(const struct CensregSample *sample);

// # Safety
// `sample` must be a live handle or null (returns 0).
size_t censreg_sample_censored(const struct CensregSample *sample);

// Validates the sample (rank, not all censored) and fits `estimator`.
// `options` may be null for the defaults.
//
// # Safety
// `sample` must be a live handle, `options` null or readable, `out`
// writable.
enum CensregStatus censreg_fit(const struct CensregSample *sample,
                               enum CensregEstimator estimator,
                               const struct CensregOptions *options,
                               struct CensregFit **out);

// # Safety
// `fit` must come from `censreg_fit` and not be freed twice.
void censreg_fit_free(struct CensregFit *fit);

// Number of coefficients, 0 for null.
//
// # Safety
// `fit` must be a live handle or null.
size_t censreg_fit_p(const struct CensregFit *fit);

// Copies the coefficients into `out[0..len]`; `len` must be at least
// `censreg_fit_p(fit)`.
//
// # Safety
// `fit` must be a live handle and `out` writable for `len` doubles.
enum CensregStatus censreg_fit_beta(const struct CensregFit *fit, double *out, size_t len);

// Residual scale; NaN for null.
//
// # Safety
// `fit` must be a live handle or null.
double censreg_fit_scale(const struct CensregFit *fit);

// Estimator criterion at the fit; NaN for null.
//
// # Safety
// `fit` must be a live handle or null.
double censreg_fit_objective(const struct CensregFit *fit);

// # Safety
// `fit` must be a live handle or null.
bool censreg_fit_converged(const struct CensregFit *fit);

// # Safety
// `fit` must be a live handle or null.
bool censreg_fit_exact(const struct CensregFit *fit);

// # Safety
// `fit` must be a live handle or null.
size_t censreg_fit_evaluations(const struct CensregFit *fit);

// Breakdown lower bound for the sample at scale ratio `b_over_a`.
//
// # Safety
// `sample` must be a live handle and `out` writable.
enum CensregStatus censreg_breakdown_bound(const struct CensregSample *sample,
                                           double b_over_a,
                                           struct CensregBreakdown *out);

// Kaplan–Meier masses `π_i` of the residuals `y* − Xβ`, written to
// `out_pi[0..n]` in observation order (zero for censored residuals).
//
// # Safety
// `sample` must be a live handle, `beta` readable for `p` doubles and
// `out_pi` writable for `n` doubles.
enum CensregStatus censreg_km_weights(const struct CensregSample *sample,
                                      const double *beta,
                                      size_t p,
                                      double *out_pi,
                                      size_t n);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len − 1` bytes) and returns the full message length
// excluding the terminator. With a null `buf` only the length is returned.
//
// # Safety
// `buf` must be null or writable for `len` bytes.
size_t censreg_last_error_message(char *buf, size_t len);

// Name of an estimator as accepted by the command line; static storage.
const char *censreg_estimator_name(enum CensregEstimator estimator);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENSREG_H */

#ifndef MSLAB_H
#define MSLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Averaging regime codes returned by [`mslab_config_regime`].
typedef enum MslabRegime {
  MSLAB_REGIME_NO_HOMOGENIZATION = 0,
  MSLAB_REGIME_REGIME1 = 1,
  MSLAB_REGIME_REGIME2 = 2,
  MSLAB_REGIME_UNCLASSIFIED = 3,
} MslabRegime;

// Result of every exported call.
typedef enum MslabStatus {
  MSLAB_STATUS_OK = 0,
  MSLAB_STATUS_NULL_POINTER = 1,
  MSLAB_STATUS_INVALID_UTF8 = 2,
  // Rejected input; the command line exits with 1 for these.
  MSLAB_STATUS_INVALID_INPUT = 3,
  // Numerical failure; the command line exits with 2 for these.
  MSLAB_STATUS_NUMERICAL = 4,
  MSLAB_STATUS_OUT_OF_RANGE = 5,
  MSLAB_STATUS_PANIC = 6,
} MslabStatus;

// Validated run configuration.
typedef struct MslabConfig MslabConfig;

// Error curve over the eps list.
typedef struct MslabCurve MslabCurve;

// Parsed scalar expression.
typedef struct MslabExpr MslabExpr;

// Least-squares fit of `log2 error` against `log2 eps`.
typedef struct MslabFit {
  double slope;
  double intercept;
  double r_squared;
  double slope_stderr;
  // NaN when no prediction is available.
  double predicted_slope;
} MslabFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *mslab_last_error(void);

// Library version as a static NUL-terminated string.
const char *mslab_version(void);

// Loads and validates a TOML run configuration from `path`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MslabStatus mslab_config_load(const char *path, struct MslabConfig **out);

// Parses a configuration from TOML text; relative output paths resolve
// against the current directory.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum MslabStatus mslab_config_parse(const char *text, struct MslabConfig **out);

// # Safety
// `cfg` must come from a config constructor and not be used afterwards. Null is ignored.
void mslab_config_free(struct MslabConfig *cfg);

// Replaces the master seed and every seed derived from it.
//
// # Safety
// `cfg` must be a live config handle.
enum MslabStatus mslab_config_set_seed(struct MslabConfig *cfg, uint64_t seed);

// Replaces the eps list; it must be strictly decreasing in (0, 1).
//
// # Safety
// `cfg` must be a live config handle and `eps` point to `n` doubles.
enum MslabStatus mslab_config_set_eps(struct MslabConfig *cfg, const double *eps, size_t n);

// Sets the number of Monte Carlo replicas per eps.
//
// # Safety
// `cfg` must be a live config handle.
enum MslabStatus mslab_config_set_replicas(struct MslabConfig *cfg, size_t n_mc);

// Averaging regime of the configured schedule.
//
// # Safety
// `cfg` must be a live config handle and `out` writable.
enum MslabStatus mslab_config_regime(const struct MslabConfig *cfg, enum MslabRegime *out);

// Deviation tag such as `R1_2`, copied NUL-terminated into `buf`. Fails with
// `OUT_OF_RANGE` if `len` is too small; `eta_exp` may be null.
//
// # Safety
// `cfg` must be a live config handle and `buf` hold `len` bytes.
enum MslabStatus mslab_config_deviation(const struct MslabConfig *cfg,
                                        char *buf,
                                        size_t len,
                                        double *eta_exp);

// Predicted slope of the strong error curve, including the moment order q.
//
// # Safety
// `cfg` must be a live config handle and `out` writable.
enum MslabStatus mslab_config_predicted_strong_slope(const struct MslabConfig *cfg, double *out);

// Estimates the averaged drift and runs the strong error experiment.
//
// # Safety
// `cfg` must be a live config handle and `out` writable.
enum MslabStatus mslab_strong_error(const struct MslabConfig *cfg, struct MslabCurve **out);

// # Safety
// `curve` must come from an experiment call and not be used afterwards. Null is ignored.
void mslab_curve_free(struct MslabCurve *curve);

// Number of eps levels in the curve.
//
// # Safety
// `curve` must be a live curve handle and `out` writable.
enum MslabStatus mslab_curve_len(const struct MslabCurve *curve, size_t *out);

// Point `i` of the curve. Any output pointer may be null.
//
// # Safety
// `curve` must be a live curve handle; non-null outputs must be writable.
enum MslabStatus mslab_curve_point(const struct MslabCurve *curve,
                                   size_t i,
                                   double *eps,
                                   double *error,
                                   double *stderr);

// Fits the rate of the curve.
//
// # Safety
// `curve` must be a live curve handle and `out` writable.
enum MslabStatus mslab_curve_fit(const struct MslabCurve *curve, struct MslabFit *out);

// Writes `eps,error,stderr,exploded_fraction` to `path`.
//
// # Safety
// `curve` must be a live curve handle and `path` a NUL-terminated string.
enum MslabStatus mslab_curve_write_csv(const struct MslabCurve *curve, const char *path);

// Parses an expression over `t`, `x1..`, `y1..` and `z1..`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum MslabStatus mslab_expr_parse(const char *text, struct MslabExpr **out);

// # Safety
// `expr` must come from an expression constructor and not be used afterwards. Null is ignored.
void mslab_expr_free(struct MslabExpr *expr);

// Evaluates at `(t, x, y)`.
//
// # Safety
// `expr` must be a live expression handle, `x` and `y` point to `nx` and
// `ny` doubles, and `out` be writable.
enum MslabStatus mslab_expr_eval(const struct MslabExpr *expr,
                                 double t,
                                 const double *x,
                                 size_t nx,
                                 const double *y,
                                 size_t ny,
                                 double *out);

// Symbolic partial derivative. `var` is `'t'`, `'x'`, `'y'` or `'z'`;
// `index` is one-based and ignored for `'t'`.
//
// # Safety
// `expr` must be a live expression handle and `out` writable.
enum MslabStatus mslab_expr_derivative(const struct MslabExpr *expr,
                                       char var,
                                       size_t index,
                                       struct MslabExpr **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSLAB_H */

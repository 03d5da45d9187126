#ifndef REGFILT_H
#define REGFILT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RegfiltMethod {
  REGFILT_METHOD_HORN = 0,
  REGFILT_METHOD_KF = 1,
  REGFILT_METHOD_RF = 2,
} RegfiltMethod;

/**
 * Status codes. `0` to `4` match the exit codes of the `regfilt` CLI.
 */
typedef enum RegfiltStatus {
  REGFILT_STATUS_OK = 0,
  REGFILT_STATUS_IO = 1,
  REGFILT_STATUS_INVALID_ARGUMENT = 2,
  REGFILT_STATUS_NUMERICAL_FAILURE = 3,
  REGFILT_STATUS_ROBUSTNESS_INFEASIBLE = 4,
  REGFILT_STATUS_NULL_POINTER = 5,
  REGFILT_STATUS_PANIC = 6,
} RegfiltStatus;

/**
 * Opaque list of correspondences.
 */
typedef struct RegfiltCorrespondences RegfiltCorrespondences;

/**
 * Opaque registration outcome.
 */
typedef struct RegfiltResult RegfiltResult;

/**
 * Filter settings; obtain defaults from [`regfilt_options_default`].
 */
typedef struct RegfiltOptions {
  double process_sigma;
  /**
   * Used for pairs without their own sigma.
   */
  double measurement_sigma[3];
  double prior_covariance_scale;
  size_t sweeps;
  double theta;
  double theta_backoff;
  size_t max_backoffs;
  /**
   * Entry of the process-model uncertainty, applied to all nine states.
   */
  double sigma_a;
} RegfiltOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *regfilt_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *regfilt_version(void);

struct RegfiltOptions regfilt_options_default(void);

struct RegfiltCorrespondences *regfilt_correspondences_new(void);

/**
 * # Safety
 * `set` must be null or a handle from this library not yet freed.
 */
void regfilt_correspondences_free(struct RegfiltCorrespondences *set);

/**
 * Appends one pair. `sigma` may be null.
 *
 * # Safety
 * `source`, `target` and a non-null `sigma` must point to 3 doubles.
 */
enum RegfiltStatus regfilt_correspondences_push(struct RegfiltCorrespondences *set,
                                                const double *source,
                                                const double *target,
                                                const double *sigma);

/**
 * Number of pairs; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t regfilt_correspondences_len(const struct RegfiltCorrespondences *set);

/**
 * Loads a correspondence CSV (millimeters) into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RegfiltStatus regfilt_correspondences_load_csv(const char *path,
                                                    struct RegfiltCorrespondences **out);

/**
 * Registers `set` with `method`, one of the [`RegfiltMethod`] values.
 * `options` may be null for defaults. On success `*out` receives a result
 * handle.
 *
 * # Safety
 * `set` must be a live handle, `options` null or valid, `out` writable.
 */
enum RegfiltStatus regfilt_register(const struct RegfiltCorrespondences *set,
                                    uint32_t method,
                                    const struct RegfiltOptions *options,
                                    struct RegfiltResult **out);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
void regfilt_result_free(struct RegfiltResult *result);

/**
 * Row-major rotation into `out[9]`.
 *
 * # Safety
 * `result` must be a live handle and `out` must hold 9 doubles.
 */
enum RegfiltStatus regfilt_result_rotation(const struct RegfiltResult *result, double *out);

/**
 * Translation (meters) into `out[3]`.
 *
 * # Safety
 * `result` must be a live handle and `out` must hold 3 doubles.
 */
enum RegfiltStatus regfilt_result_translation(const struct RegfiltResult *result, double *out);

/**
 * RMSE in meters; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double regfilt_result_rmse(const struct RegfiltResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
double regfilt_result_scale(const struct RegfiltResult *result);

/**
 * Filter steps taken (0 for the closed form or a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t regfilt_result_steps(const struct RegfiltResult *result);

/**
 * Depth standard deviation of level `k` among the levels extracted from
 * `depths[0..n]`, using level offset `i`.
 *
 * # Safety
 * `depths` must point to `n` doubles; `out` must be writable.
 */
enum RegfiltStatus regfilt_sigma_z(const double *depths,
                                   size_t n,
                                   size_t k,
                                   size_t i,
                                   double merge_epsilon,
                                   double *out);

/**
 * Per-axis sigmas `(sx, sy, sz)` of pixel `(u, v)` with depth sigma `sz`.
 *
 * # Safety
 * `out` must hold 3 doubles.
 */
enum RegfiltStatus regfilt_point_sigmas(double fx,
                                        double fy,
                                        double cx,
                                        double cy,
                                        double u,
                                        double v,
                                        double sz,
                                        double *out);

/**
 * Rank-one covariance `s·sᵀ` of `sigma[3]`, row-major into `out[9]`.
 *
 * # Safety
 * `sigma` must hold 3 doubles and `out` 9.
 */
enum RegfiltStatus regfilt_point_covariance(const double *sigma, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGFILT_H */

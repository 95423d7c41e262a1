#ifndef INDI_H
#define INDI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum IndiStatus {
  INDI_STATUS_OK = 0,
  INDI_STATUS_NULL_POINTER = 1,
  INDI_STATUS_INVALID_ARGUMENT = 2,
  INDI_STATUS_DIMENSION_MISMATCH = 3,
  INDI_STATUS_DOMAIN = 4,
  INDI_STATUS_NON_FINITE = 5,
  INDI_STATUS_CHECKPOINT = 6,
  INDI_STATUS_IO = 7,
  INDI_STATUS_INTERNAL = 8,
  INDI_STATUS_PANIC = 9,
} IndiStatus;

// Noise added along the restoration path.
typedef enum IndiScheduleKind {
  // `eps_t = epsilon`; `epsilon = 0` is noiseless.
  INDI_SCHEDULE_KIND_CONSTANT = 0,
  // `eps_t = epsilon / sqrt(t)`.
  INDI_SCHEDULE_KIND_BROWNIAN = 1,
} IndiScheduleKind;

typedef enum IndiSampler {
  INDI_SAMPLER_INDI = 0,
  INDI_SAMPLER_NAIVE = 1,
  INDI_SAMPLER_COLD_DIFFUSION = 2,
} IndiSampler;

// Opaque estimator handle.
typedef struct IndiEstimator IndiEstimator;

typedef struct IndiSchedule {
  enum IndiScheduleKind kind;
  double epsilon;
} IndiSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *indi_version(void);

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *indi_last_error_message(void);

// Ideal estimator for a Gaussian prior `N(c, sigma_c^2 I)` observed through
// additive noise of std `sigma_n`.
//
// # Safety
// `c` must point to `dim` doubles and `out` must be writable.
enum IndiStatus indi_gaussian_oracle_new(const double *c,
                                         size_t dim,
                                         double sigma_c,
                                         double sigma_n,
                                         struct IndiSchedule noise,
                                         struct IndiEstimator **out);

// Ideal estimator for a discrete prior on `n_modes` points with weights
// `weights`, observed as `y = H x + sigma n`.
//
// # Safety
// `modes` must hold `n_modes * dim` doubles (one mode per row), `weights`
// `n_modes` doubles, `h` `dim * dim` doubles, and `out` must be writable.
enum IndiStatus indi_mixture_oracle_new(const double *modes,
                                        size_t n_modes,
                                        size_t dim,
                                        const double *weights,
                                        const double *h,
                                        double sigma,
                                        struct IndiSchedule noise,
                                        struct IndiEstimator **out);

// Loads a trained regressor from a checkpoint file.
//
// # Safety
// `path` must be a nul-terminated UTF-8 string and `out` must be writable.
enum IndiStatus indi_estimator_load_checkpoint(const char *path, struct IndiEstimator **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `handle` must come from this library and not be used afterwards.
void indi_estimator_free(struct IndiEstimator *handle);

// Writes the state dimension of `handle` to `out`.
//
// # Safety
// `handle` must be live and `out` writable.
enum IndiStatus indi_estimator_dim(const struct IndiEstimator *handle, size_t *out);

// Evaluates `F(x_t, t)` into `out`; both buffers hold `len` doubles.
//
// # Safety
// `handle` must be live and both buffers must hold `len` doubles.
enum IndiStatus indi_estimator_predict(const struct IndiEstimator *handle,
                                       const double *x_t,
                                       size_t len,
                                       double t,
                                       double *out);

// Restores observation `y` with `steps` steps of the chosen sampler and
// writes the result to `out`. `seed` drives the schedule noise.
//
// # Safety
// `handle` must be live and both buffers must hold `len` doubles.
enum IndiStatus indi_restore(const struct IndiEstimator *handle,
                             enum IndiSampler sampler,
                             const double *y,
                             size_t len,
                             size_t steps,
                             struct IndiSchedule noise,
                             uint64_t seed,
                             double *out);

// Writes `x_t = (1 - t) x + t y` to `out`.
//
// # Safety
// All three buffers must hold `len` doubles.
enum IndiStatus indi_forward_interpolate(const double *x,
                                         const double *y,
                                         size_t len,
                                         double t,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INDI_H */

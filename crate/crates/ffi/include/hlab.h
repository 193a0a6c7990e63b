#ifndef HLAB_H
#define HLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlabStatus {
  HLAB_STATUS_OK = 0,
  HLAB_STATUS_NULL_POINTER = 1,
  HLAB_STATUS_INVALID_ARGUMENT = 2,
  HLAB_STATUS_IO = 3,
  HLAB_STATUS_FORMAT = 4,
  HLAB_STATUS_VALIDATION = 5,
  HLAB_STATUS_INCOMPATIBLE = 6,
  HLAB_STATUS_DOMAIN = 7,
  HLAB_STATUS_DEGENERATE = 8,
  HLAB_STATUS_UNDEFINED = 9,
  HLAB_STATUS_BUFFER_TOO_SMALL = 10,
  HLAB_STATUS_PANIC = 11,
} HlabStatus;

typedef enum HlabEstimator {
  HLAB_ESTIMATOR_AUM = 0,
  HLAB_ESTIMATOR_EL2N = 1,
  HLAB_ESTIMATOR_FORGETTING = 2,
} HlabEstimator;

typedef enum HlabForgettingMode {
  HLAB_FORGETTING_MODE_EVENT_COUNT = 0,
  HLAB_FORGETTING_MODE_NEVER_LEARNED_MAX = 1,
} HlabForgettingMode;

typedef enum HlabPruneMode {
  HLAB_PRUNE_MODE_DLP = 0,
  HLAB_PRUNE_MODE_CLP = 1,
} HlabPruneMode;

/**
 * Parsed HDYN training-dynamics log.
 */
typedef struct HlabDynamics HlabDynamics;

/**
 * Labelled feature set from an HFEA file.
 */
typedef struct HlabFeatures HlabFeatures;

/**
 * Per-sample ensemble hardness.
 */
typedef struct HlabHardness HlabHardness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *hlab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hlab_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HlabStatus hlab_dynamics_load(const char *path, struct HlabDynamics **out);

/**
 * # Safety
 * `h` must come from [`hlab_dynamics_load`] and not be used afterwards.
 */
void hlab_dynamics_free(struct HlabDynamics *h);

/**
 * # Safety
 * `h` must be a live handle; output pointers must be valid.
 */
enum HlabStatus hlab_dynamics_shape(const struct HlabDynamics *h,
                                    size_t *n_samples,
                                    size_t *n_epochs,
                                    uint32_t *channel_flags);

/**
 * Ensemble hardness over `n_logs` dynamics handles.
 *
 * # Safety
 * `logs` must point to `n_logs` live handles; `out` must be valid.
 */
enum HlabStatus hlab_hardness_compute(const struct HlabDynamics *const *logs,
                                      size_t n_logs,
                                      enum HlabEstimator estimator,
                                      size_t probe_epoch,
                                      enum HlabForgettingMode forgetting_mode,
                                      struct HlabHardness **out);

/**
 * # Safety
 * `h` must be a live handle; `len` must be valid.
 */
enum HlabStatus hlab_hardness_len(const struct HlabHardness *h, size_t *len);

/**
 * Copies the per-sample values into `buf` (capacity `cap`).
 *
 * # Safety
 * `h` must be a live handle; `buf` must hold `cap` doubles.
 */
enum HlabStatus hlab_hardness_values(const struct HlabHardness *h,
                                     double *buf,
                                     size_t cap,
                                     size_t *len);

/**
 * # Safety
 * `h` must come from [`hlab_hardness_compute`] and not be used afterwards.
 */
void hlab_hardness_free(struct HlabHardness *h);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HlabStatus hlab_features_load(const char *path, struct HlabFeatures **out);

/**
 * # Safety
 * `h` must be a live handle; output pointers must be valid.
 */
enum HlabStatus hlab_features_shape(const struct HlabFeatures *h,
                                    size_t *n_samples,
                                    size_t *dim,
                                    size_t *k_classes);

/**
 * # Safety
 * `h` must come from [`hlab_features_load`] and not be used afterwards.
 */
void hlab_features_free(struct HlabFeatures *h);

/**
 * Resampling target count per class at scaling `alpha`.
 *
 * # Safety
 * Handles must be live; `buf` must hold `cap` elements.
 */
enum HlabStatus hlab_target_counts(const struct HlabHardness *hardness,
                                   const struct HlabFeatures *features,
                                   double alpha,
                                   size_t *buf,
                                   size_t cap,
                                   size_t *len);

/**
 * Oversampling weight `W(x)` for a rank position `x` in `[0, 1]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HlabStatus hlab_weight_function(double x, double beta, double *out);

/**
 * Ascending ids removed by pruning a fraction `rate` of the samples.
 *
 * # Safety
 * Handles must be live; `buf` must hold `cap` elements.
 */
enum HlabStatus hlab_prune(const struct HlabHardness *hardness,
                           const struct HlabFeatures *features,
                           enum HlabPruneMode mode,
                           double rate,
                           size_t *buf,
                           size_t cap,
                           size_t *len);

/**
 * Estimator that produced `h`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be valid.
 */
enum HlabStatus hlab_hardness_estimator(const struct HlabHardness *h, enum HlabEstimator *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLAB_H */

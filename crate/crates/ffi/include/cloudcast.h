#ifndef CLOUDCAST_H
#define CLOUDCAST_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define CC_MAX_CLASSES 11

#define CC_MAX_STEPS 16

typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_INVALID_ARGUMENT = 1,
  CC_STATUS_IO = 2,
  CC_STATUS_SHAPE = 3,
  CC_STATUS_INVALID_LABEL = 4,
  CC_STATUS_TIMESTAMPS = 5,
  CC_STATUS_INSUFFICIENT_FRAMES = 6,
  CC_STATUS_FORMAT = 7,
  CC_STATUS_NULL_POINTER = 8,
  CC_STATUS_PANIC = 9,
} CcStatus;

typedef enum CcField {
  CC_FIELD_BANDLIMITED_NOISE = 0,
  CC_FIELD_GAUSSIAN_BLOBS = 1,
} CcField;

/**
 * Forecast handle: up to 16 predicted frames from one origin.
 */
typedef struct CcForecast CcForecast;

/**
 * Label sequence handle.
 */
typedef struct CcSequence CcSequence;

/**
 * Flow solver settings; see [`cc_tvl1_default_params`].
 */
typedef struct CcTvL1Params {
  double tau;
  double lambda;
  double theta;
  size_t nscales;
  double scale_step;
  size_t warps;
  double epsilon;
  size_t inner_iterations;
  size_t outer_iterations;
  double gamma;
  size_t median_filter_radius;
} CcTvL1Params;

/**
 * Scores of one forecast. Undefined entries (a class never observed, no
 * skill reference) are NaN.
 */
typedef struct CcMetrics {
  double mean_accuracy;
  size_t classes;
  double per_class_accuracy[CC_MAX_CLASSES];
  size_t steps;
  double per_step_accuracy[CC_MAX_STEPS];
  double frequency_bias;
  double brier_score;
  double brier_skill_score;
  double ssim;
  double psnr;
} CcMetrics;

/**
 * Cloud-top height thresholds (K), coldest first.
 */
typedef struct CcThresholds {
  double very_high;
  double high;
  double medium;
  double low;
} CcThresholds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cc_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *cc_last_error_message(void);

/**
 * Loads a `T x H x W` label array and its timestamp sidecar.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum CcStatus cc_sequence_load(const char *npy_path,
                               const char *sidecar_path,
                               struct CcSequence **out);

/**
 * Builds a sequence from `frames * height * width` row-major labels and one
 * Unix timestamp per frame. `full_taxonomy` selects the 11-class codes.
 *
 * # Safety
 * `labels` and `timestamps` must hold the stated number of elements.
 */
enum CcStatus cc_sequence_from_labels(size_t frames,
                                      size_t height,
                                      size_t width,
                                      const uint8_t *labels,
                                      const int64_t *timestamps,
                                      bool full_taxonomy,
                                      struct CcSequence **out);

/**
 * Releases a sequence; NULL is ignored.
 *
 * # Safety
 * `seq` must come from this library and not be used afterwards.
 */
void cc_sequence_free(struct CcSequence *seq);

/**
 * # Safety
 * `seq` must be a live handle; output pointers must be writable.
 */
enum CcStatus cc_sequence_dims(const struct CcSequence *seq,
                               size_t *frames,
                               size_t *height,
                               size_t *width);

/**
 * Number of classes in the sequence's taxonomy (4 or 11).
 *
 * # Safety
 * `seq` must be a live handle; `classes` must be writable.
 */
enum CcStatus cc_sequence_classes(const struct CcSequence *seq, size_t *classes);

/**
 * Copies all labels (frame-major, row-major) into `out`.
 *
 * # Safety
 * `out` must point to `len` writable bytes.
 */
enum CcStatus cc_sequence_labels(const struct CcSequence *seq, uint8_t *out, size_t len);

/**
 * Copies the frame timestamps (Unix seconds) into `out`.
 *
 * # Safety
 * `out` must point to `len` writable values.
 */
enum CcStatus cc_sequence_timestamps(const struct CcSequence *seq, int64_t *out, size_t len);

/**
 * # Safety
 * `seq` must be a live handle; paths NUL-terminated.
 */
enum CcStatus cc_sequence_save(const struct CcSequence *seq,
                               const char *npy_path,
                               const char *sidecar_path);

/**
 * Maps an 11-class sequence onto the 4-class taxonomy.
 *
 * # Safety
 * `seq` must be a live handle; `out` writable.
 */
enum CcStatus cc_sequence_reduce(const struct CcSequence *seq, struct CcSequence **out);

/**
 * Synthetic 4-class scene translated by (vx, vy) px per frame, starting at
 * 2017-01-01 00:00 UTC. The true flow is uniform (vx, vy).
 *
 * # Safety
 * `out` must be writable.
 */
enum CcStatus cc_synthetic_translation(enum CcField field,
                                       size_t height,
                                       size_t width,
                                       size_t frames,
                                       double vx,
                                       double vy,
                                       uint64_t seed,
                                       struct CcSequence **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CcStatus cc_tvl1_default_params(struct CcTvL1Params *out);

/**
 * Flow extrapolation from frames `origin - 1` and `origin`. `params` may be
 * NULL for the defaults.
 *
 * # Safety
 * `seq` must be a live handle; `params` NULL or readable; `out` writable.
 */
enum CcStatus cc_forecast_tvl1(const struct CcSequence *seq,
                               size_t origin,
                               const struct CcTvL1Params *params,
                               size_t steps,
                               struct CcForecast **out);

/**
 * Repeats frame `origin` for `steps` frames.
 *
 * # Safety
 * `seq` must be a live handle; `out` writable.
 */
enum CcStatus cc_forecast_persistence(const struct CcSequence *seq,
                                      size_t origin,
                                      size_t steps,
                                      struct CcForecast **out);

/**
 * Releases a forecast; NULL is ignored.
 *
 * # Safety
 * `forecast` must come from this library and not be used afterwards.
 */
void cc_forecast_free(struct CcForecast *forecast);

/**
 * # Safety
 * `forecast` must be a live handle; output pointers writable.
 */
enum CcStatus cc_forecast_dims(const struct CcForecast *forecast,
                               size_t *steps,
                               size_t *height,
                               size_t *width);

/**
 * # Safety
 * `out` must point to `len` writable bytes.
 */
enum CcStatus cc_forecast_labels(const struct CcForecast *forecast, uint8_t *out, size_t len);

/**
 * # Safety
 * `forecast` must be a live handle; paths NUL-terminated.
 */
enum CcStatus cc_forecast_save(const struct CcForecast *forecast,
                               const char *npy_path,
                               const char *sidecar_path);

/**
 * Scores `forecast` against the frames of `observed` at the same times.
 * `reference` (may be NULL) enables the Brier skill score.
 *
 * # Safety
 * Handles must be live (or NULL for `reference`); `out` writable.
 */
enum CcStatus cc_evaluate(const struct CcForecast *forecast,
                          const struct CcSequence *observed,
                          const struct CcForecast *reference,
                          struct CcMetrics *out);

/**
 * Height thresholds from 500/700/850 hPa and tropopause temperatures (K).
 *
 * # Safety
 * `out` must be writable.
 */
enum CcStatus cc_height_thresholds(double t500,
                                   double t700,
                                   double t850,
                                   double t_tropo,
                                   struct CcThresholds *out);

/**
 * `1 - model / reference`; fails when the reference score is not positive.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcStatus cc_brier_skill_score(double bs_model, double bs_reference, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLOUDCAST_H */

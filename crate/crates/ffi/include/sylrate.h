#ifndef SYLRATE_H
#define SYLRATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SylrateStatus {
  SYLRATE_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SYLRATE_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range (wrong weight count, bad sample rate, index past the end, ...).
   */
  SYLRATE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A file could not be opened or read.
   */
  SYLRATE_STATUS_IO = 3,
  /**
   * Audio container or encoding not supported.
   */
  SYLRATE_STATUS_FORMAT = 4,
  /**
   * A parameter or configuration file could not be parsed.
   */
  SYLRATE_STATUS_PARSE = 5,
  /**
   * Unexpected failure inside the library, including caught panics.
   */
  SYLRATE_STATUS_INTERNAL = 6,
} SylrateStatus;

/**
 * Nuclei found in one clip.
 */
typedef struct SylrateDetection SylrateDetection;

/**
 * Trained detector parameters plus the analysis configuration they were trained with.
 */
typedef struct SylrateParams SylrateParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sylrate_version(void);

/**
 * Message for the most recent failure on the calling thread, or NULL if the
 * last call succeeded. The pointer stays valid until the next sylrate call
 * on the same thread.
 */
const char *sylrate_last_error_message(void);

/**
 * Builds parameters from `n_weights` (must be 7) band weights and a
 * prominence threshold, using the default analysis configuration.
 *
 * # Safety
 * `weights` must point to `n_weights` readable doubles; `out` must be writable.
 */
enum SylrateStatus sylrate_params_new(const double *weights,
                                      size_t n_weights,
                                      double prominence_threshold,
                                      struct SylrateParams **out);

/**
 * Loads a parameter file written by `sylrate optimize`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SylrateStatus sylrate_params_load(const char *path, struct SylrateParams **out);

/**
 * Copies the seven band weights into `weights_out`.
 *
 * # Safety
 * `params` must be a live handle; `weights_out` must hold `n` doubles.
 */
enum SylrateStatus sylrate_params_weights(const struct SylrateParams *params,
                                          double *weights_out,
                                          size_t n);

/**
 * Prominence threshold of `params`, or NaN for a NULL handle.
 *
 * # Safety
 * `params` must be NULL or a live handle.
 */
double sylrate_params_threshold(const struct SylrateParams *params);

/**
 * # Safety
 * `params` must be NULL or a handle not yet freed.
 */
void sylrate_params_free(struct SylrateParams *params);

/**
 * Detects syllable nuclei in `len` mono samples scaled to [-1, 1].
 *
 * # Safety
 * `params` must be a live handle, `samples` must point to `len` doubles and
 * `out` must be writable.
 */
enum SylrateStatus sylrate_detect_samples(const struct SylrateParams *params,
                                          const double *samples,
                                          size_t len,
                                          uint32_t sample_rate,
                                          struct SylrateDetection **out);

/**
 * Reads a 16-bit PCM mono WAV file and detects syllable nuclei in it.
 *
 * # Safety
 * `params` must be a live handle, `path` a NUL-terminated string and `out` writable.
 */
enum SylrateStatus sylrate_detect_wav(const struct SylrateParams *params,
                                      const char *path,
                                      struct SylrateDetection **out);

/**
 * Number of detected nuclei; 0 for a NULL handle.
 *
 * # Safety
 * `det` must be NULL or a live handle.
 */
size_t sylrate_detection_count(const struct SylrateDetection *det);

/**
 * Syllables per second over the whole clip; NaN for a NULL handle.
 *
 * # Safety
 * `det` must be NULL or a live handle.
 */
double sylrate_detection_speech_rate(const struct SylrateDetection *det);

/**
 * Time (seconds) and prominence of nucleus `index`. Either output pointer may be NULL.
 *
 * # Safety
 * `det` must be a live handle; non-NULL outputs must be writable.
 */
enum SylrateStatus sylrate_detection_nucleus(const struct SylrateDetection *det,
                                             size_t index,
                                             double *time_s,
                                             double *prominence);

/**
 * # Safety
 * `det` must be NULL or a handle not yet freed.
 */
void sylrate_detection_free(struct SylrateDetection *det);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYLRATE_H */

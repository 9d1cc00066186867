#ifndef EMBML_H
#define EMBML_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EmbmlStatus {
  EMBML_STATUS_OK = 0,
  EMBML_STATUS_NULL_POINTER = 1,
  EMBML_STATUS_INVALID_ARGUMENT = 2,
  EMBML_STATUS_DIMENSION_MISMATCH = 3,
  EMBML_STATUS_NOT_POSITIVE_DEFINITE = 4,
  EMBML_STATUS_INSUFFICIENT_DATA = 5,
  EMBML_STATUS_INSUFFICIENT_TRIALS = 6,
  EMBML_STATUS_IO = 7,
  EMBML_STATUS_FORMAT = 8,
  EMBML_STATUS_PARSE = 9,
  EMBML_STATUS_PANIC = 10,
} EmbmlStatus;

typedef enum EmbmlDetector {
  EMBML_DETECTOR_GLRT = 0,
  EMBML_DETECTOR_AMF = 1,
  EMBML_DETECTOR_RAO = 2,
  EMBML_DETECTOR_ACE = 3,
  EMBML_DETECTOR_BENCHMARK = 4,
  /**
   * EM-BML-D; the iteration count is passed separately.
   */
  EMBML_DETECTOR_EM_BML_D = 5,
} EmbmlDetector;

/**
 * One CUT plus its secondary snapshots.
 */
typedef struct EmbmlBatch EmbmlBatch;

/**
 * Homogeneous Gaussian scene: covariance, steering vector and seed.
 */
typedef struct EmbmlScenario EmbmlScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *embml_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *embml_last_error(void);

/**
 * Creates a scene with `n` channels, `k` secondary snapshots, one-lag
 * clutter correlation `rho`, clutter-to-noise ratio `cnr_db` (unit noise
 * power), steering Doppler `doppler_norm` and master seed `seed`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum EmbmlStatus embml_scenario_new(size_t n,
                                    size_t k,
                                    double rho,
                                    double cnr_db,
                                    double doppler_norm,
                                    uint64_t seed,
                                    struct EmbmlScenario **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle from [`embml_scenario_new`] that has
 * not been freed.
 */
void embml_scenario_free(struct EmbmlScenario *scenario);

/**
 * Draws target-free trial `trial` of the scene's evaluation stream.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for one handle.
 */
enum EmbmlStatus embml_scenario_sample(const struct EmbmlScenario *scenario,
                                       uint64_t trial,
                                       struct EmbmlBatch **out);

/**
 * Adds a target along the scene's steering vector to the CUT of `batch`,
 * at `scnr_db` relative to the scene's covariance and amplitude phase
 * `phase` (radians).
 *
 * # Safety
 * `scenario` and `batch` must be live handles.
 */
enum EmbmlStatus embml_scenario_inject(const struct EmbmlScenario *scenario,
                                       struct EmbmlBatch *batch,
                                       double scnr_db,
                                       double phase);

/**
 * Statistic of `detector` on `batch` with the scene's steering vector.
 * For the benchmark this is the clairvoyant matched filter
 * `Re(v†M⁻¹z) / √(v†M⁻¹v)` for a zero-phase target. `l_max` is only read
 * for EM-BML-D.
 *
 * # Safety
 * `scenario` and `batch` must be live handles and `out` valid for one double.
 */
enum EmbmlStatus embml_scenario_statistic(const struct EmbmlScenario *scenario,
                                          const struct EmbmlBatch *batch,
                                          enum EmbmlDetector detector,
                                          uint32_t l_max,
                                          double *out);

/**
 * Threshold at false-alarm probability `pfa` from `trials` null trials of
 * the scene's calibration stream, using `workers` threads (0 = all cores).
 * Needs `trials >= 100 / pfa`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for one double.
 */
enum EmbmlStatus embml_scenario_calibrate(const struct EmbmlScenario *scenario,
                                          enum EmbmlDetector detector,
                                          uint32_t l_max,
                                          double pfa,
                                          size_t trials,
                                          size_t workers,
                                          double *out);

/**
 * Builds a batch from `n * (k + 1)` interleaved complex samples: the CUT
 * first, then the `k` secondary snapshots, each `n` long.
 *
 * # Safety
 * `data` must point to `2 * n * (k + 1)` readable doubles and `out` be
 * valid for one handle.
 */
enum EmbmlStatus embml_batch_new(size_t n, size_t k, const double *data, struct EmbmlBatch **out);

/**
 * # Safety
 * `batch` must be NULL or a live handle; it is invalid afterwards.
 */
void embml_batch_free(struct EmbmlBatch *batch);

/**
 * # Safety
 * `batch` must be a live handle; `n` and `k` valid for one `size_t` each.
 */
enum EmbmlStatus embml_batch_dims(const struct EmbmlBatch *batch, size_t *n, size_t *k);

/**
 * Adaptive statistic of `detector` with a caller-supplied steering vector
 * of `n` interleaved complex entries. The benchmark is not available here.
 *
 * # Safety
 * `batch` must be a live handle, `steering` point to `2 * n` doubles and
 * `out` be valid for one double.
 */
enum EmbmlStatus embml_batch_statistic(const struct EmbmlBatch *batch,
                                       const double *steering,
                                       size_t n,
                                       enum EmbmlDetector detector,
                                       uint32_t l_max,
                                       double *out);

/**
 * Runs `l_max` EM iterations. Writes the final log posterior ratio to
 * `statistic` and, when `delta_l` is not NULL, the convergence metric of
 * iterations `1..=l_max` to `delta_l[0..l_max]`.
 *
 * # Safety
 * `batch` must be a live handle, `steering` point to `2 * n` doubles,
 * `statistic` be valid for one double and `delta_l` be NULL or valid for
 * `l_max` doubles.
 */
enum EmbmlStatus embml_run_em(const struct EmbmlBatch *batch,
                              const double *steering,
                              size_t n,
                              uint32_t l_max,
                              double *statistic,
                              double *delta_l);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBML_H */

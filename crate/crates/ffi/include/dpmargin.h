#ifndef DPMARGIN_H
#define DPMARGIN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `DPM_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum DpmStatus {
  DPM_STATUS_OK = 0,
  DPM_STATUS_NULL_ARGUMENT = 1,
  DPM_STATUS_INVALID_UTF8 = 2,
  DPM_STATUS_PARSE = 3,
  DPM_STATUS_DIMENSION = 4,
  DPM_STATUS_LABEL = 5,
  DPM_STATUS_DOMAIN = 6,
  DPM_STATUS_PRECONDITION = 7,
  DPM_STATUS_GENERATION = 8,
  DPM_STATUS_ORACLE = 9,
  DPM_STATUS_SIZE = 10,
  DPM_STATUS_RESOURCE = 11,
  DPM_STATUS_MISSING_CONTEXT = 12,
  DPM_STATUS_UNSUPPORTED = 13,
  DPM_STATUS_IO = 14,
  DPM_STATUS_JSON = 15,
  DPM_STATUS_PANIC = 16,
} DpmStatus;

typedef enum DpmFormat {
  DPM_FORMAT_CSV = 0,
  DPM_FORMAT_LIBSVM = 1,
} DpmFormat;

typedef enum DpmTuner {
  DPM_TUNER_ITERATE = 0,
  DPM_TUNER_PRIV_TUNE = 1,
} DpmTuner;

typedef enum DpmScore {
  DPM_SCORE_EMPIRICAL = 0,
  DPM_SCORE_PENALIZED = 1,
} DpmScore;

/**
 * `Default` picks last-iterate for the penalized score, averaged otherwise.
 */
typedef enum DpmMode {
  DPM_MODE_DEFAULT = 0,
  DPM_MODE_AVERAGED = 1,
  DPM_MODE_LAST_ITERATE = 2,
} DpmMode;

/**
 * Opaque labelled dataset.
 */
typedef struct DpmDataset DpmDataset;

/**
 * Opaque trained model.
 */
typedef struct DpmModel DpmModel;

typedef struct DpmTrainConfig {
  double epsilon;
  double delta;
  enum DpmTuner tuner;
  enum DpmScore score;
  enum DpmMode mode;
  uint64_t seed;
} DpmTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dpm_last_error_message(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DpmStatus dpm_dataset_load(const char *path, enum DpmFormat format, struct DpmDataset **out);

/**
 * Builds a dataset from a row-major `n × d` feature array and `n` labels in
 * {-1, +1}.
 *
 * # Safety
 * `features` must point to `n * d` doubles, `labels` to `n` bytes.
 */
enum DpmStatus dpm_dataset_from_arrays(const double *features,
                                       const int8_t *labels,
                                       size_t n,
                                       size_t d,
                                       struct DpmDataset **out);

/**
 * Synthetic unit-ball data with margin `gamma` and `outliers` flipped labels.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DpmStatus dpm_dataset_synth(size_t n,
                                 size_t d,
                                 double gamma,
                                 size_t outliers,
                                 uint64_t seed,
                                 struct DpmDataset **out);

/**
 * Number of points, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t dpm_dataset_len(const struct DpmDataset *ds);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t dpm_dataset_dim(const struct DpmDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void dpm_dataset_free(struct DpmDataset *ds);

/**
 * Runs the full private training pipeline.
 *
 * # Safety
 * All pointers must be valid; `ds` a live handle.
 */
enum DpmStatus dpm_train(const struct DpmDataset *ds,
                         const struct DpmTrainConfig *config,
                         struct DpmModel **out);

/**
 * Parses a model previously produced by [`dpm_model_to_json`] or the CLI.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DpmStatus dpm_model_from_json(const char *json, struct DpmModel **out);

/**
 * Borrowed view of the weight vector, valid while the model lives.
 *
 * # Safety
 * `model` must be a live handle; `weights` and `len` valid pointers.
 */
enum DpmStatus dpm_model_weights(const struct DpmModel *model, const double **weights, size_t *len);

/**
 * Selected margin, or NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double dpm_model_gamma(const struct DpmModel *model);

/**
 * Projection dimension of the selected candidate, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dpm_model_k(const struct DpmModel *model);

/**
 * Projection seed of the selected candidate, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint64_t dpm_model_jl_seed(const struct DpmModel *model);

/**
 * Empirical zero-one risk of `model` on `ds`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum DpmStatus dpm_model_risk(const struct DpmModel *model,
                              const struct DpmDataset *ds,
                              double *out);

/**
 * Serializes the model; release the string with [`dpm_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum DpmStatus dpm_model_to_json(const struct DpmModel *model, char **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void dpm_model_free(struct DpmModel *model);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void dpm_string_free(char *s);

/**
 * ε such that a μ-GDP mechanism is (ε, δ)-DP.
 *
 * # Safety
 * `out` must be valid.
 */
enum DpmStatus dpm_gdp_to_approx_dp(double mu, double delta, double *out);

/**
 * Total GDP budget available to the iterate-tuned pipeline at (ε, δ).
 *
 * # Safety
 * `out` must be valid.
 */
enum DpmStatus dpm_master_iter_budget(double epsilon, double delta, double *out);

/**
 * Composes `len` GDP parameters.
 *
 * # Safety
 * `mus` must point to `len` doubles (may be null when `len` is 0).
 */
enum DpmStatus dpm_compose_gdp(const double *mus, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPMARGIN_H */

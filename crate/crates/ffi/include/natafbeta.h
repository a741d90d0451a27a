#ifndef NATAFBETA_H
#define NATAFBETA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum {
  NB_STATUS_OK = 0,
  NB_STATUS_NULL_POINTER = 1,
  NB_STATUS_INVALID_ARGUMENT = 2,
  NB_STATUS_DOMAIN = 3,
  NB_STATUS_SINGULAR = 4,
  NB_STATUS_DIMENSION_MISMATCH = 5,
  NB_STATUS_UNFITTABLE = 6,
  NB_STATUS_PARSE = 7,
  NB_STATUS_IO = 8,
  NB_STATUS_SERIALIZATION = 9,
  NB_STATUS_NUMERIC_RANGE = 10,
  NB_STATUS_PANIC = 11,
} NbStatus;

/**
 * Opaque dataset handle.
 */
typedef struct NbDataset NbDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct NbModel NbModel;

/**
 * Fitting options; obtain defaults from [`nb_fit_config_default`].
 */
typedef struct {
  double rel_tol;
  uint32_t max_iter;
  double wall_clock_limit_secs;
  double fd_step;
  double prior_mean;
} NbFitConfig;

/**
 * Aggregates of a cross-validation run, as fractions.
 */
typedef struct {
  double mean_ccr;
  double std_ccr;
  double mean_pcc;
  double std_pcc;
  uint32_t folds_completed;
  uint32_t folds_failed;
} NbCvSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next call.
 */
const char *nb_last_error(void);

/**
 * Builds a dataset from a row-major `n_rows × dim` matrix and class ids `0..n_classes`.
 *
 * # Safety
 * `x` must hold `n_rows * dim` doubles, `labels` `n_rows` values, `out` be writable.
 */
NbStatus nb_dataset_from_arrays(const double *x,
                                size_t n_rows,
                                size_t dim,
                                const uint32_t *labels,
                                uint32_t n_classes,
                                NbDataset **out);

/**
 * Loads a CSV file whose last column is the class label; missing cells ("?") are mean-imputed.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
NbStatus nb_dataset_load_csv(const char *path, NbDataset **out);

/**
 * Replaces missing (NaN) cells by column means in place.
 *
 * # Safety
 * `ds` must come from this library.
 */
NbStatus nb_dataset_impute(NbDataset *ds);

/**
 * Number of rows; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or come from this library.
 */
size_t nb_dataset_len(const NbDataset *ds);

/**
 * Attribute count; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or come from this library.
 */
size_t nb_dataset_dim(const NbDataset *ds);

/**
 * Class count; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or come from this library.
 */
size_t nb_dataset_n_classes(const NbDataset *ds);

/**
 * # Safety
 * `ds` must be null or come from this library, and not be used afterwards.
 */
void nb_dataset_free(NbDataset *ds);

NbFitConfig nb_fit_config_default(void);

/**
 * Fits one-vs-rest models to every class. `config` may be null for defaults.
 *
 * # Safety
 * `ds` must come from this library; `config` null or valid; `out` writable.
 */
NbStatus nb_fit(const NbDataset *ds, const NbFitConfig *config, NbModel **out);

/**
 * Number of classes the model predicts over.
 *
 * # Safety
 * `model` must be null or come from this library.
 */
size_t nb_model_n_classes(const NbModel *model);

/**
 * Attribute count the model expects.
 *
 * # Safety
 * `model` must be null or come from this library.
 */
size_t nb_model_dim(const NbModel *model);

/**
 * Predicts `n_rows` row-major points.
 *
 * Writes `n_rows × n_classes` one-vs-rest probabilities to `probs` (row-major) and the
 * argmax class of each row to `labels`. Either output may be null.
 *
 * # Safety
 * Buffers must have the sizes stated above.
 */
NbStatus nb_predict(const NbModel *model,
                    const double *x,
                    size_t n_rows,
                    size_t dim,
                    double *probs,
                    uint32_t *labels);

/**
 * Serializes the model to a newly allocated JSON string; free it with [`nb_string_free`].
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
NbStatus nb_model_to_json(const NbModel *model, char **out);

/**
 * Parses a model written by [`nb_model_to_json`] or the command-line tool.
 *
 * # Safety
 * `json` must be NUL-terminated and `out` writable.
 */
NbStatus nb_model_from_json(const char *json, NbModel **out);

/**
 * # Safety
 * `model` must be null or come from this library, and not be used afterwards.
 */
void nb_model_free(NbModel *model);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void nb_string_free(char *s);

/**
 * k-fold cross-validation with geometric-mean PCC. `config` may be null.
 *
 * # Safety
 * `ds` must come from this library; `config` null or valid; `out` writable.
 */
NbStatus nb_cross_validate(const NbDataset *ds,
                           uint32_t k,
                           uint64_t seed,
                           bool stratify,
                           const NbFitConfig *config,
                           NbCvSummary *out);

/**
 * Simulated 1-D dataset on (0, 10) with one length scale for every field.
 *
 * # Safety
 * `out` must be writable.
 */
NbStatus nb_simulate(uint64_t seed, size_t n, double length_scale, NbDataset **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NATAFBETA_H */

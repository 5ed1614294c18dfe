/* Generated by cbindgen. Do not edit. */

#ifndef BWML_H
#define BWML_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum BwStatus {
  BW_STATUS_OK = 0,
  /**
   * Invalid argument or unknown name.
   */
  BW_STATUS_USAGE = 1,
  /**
   * Malformed, missing or inconsistent data.
   */
  BW_STATUS_DATA = 2,
  /**
   * Singular system, non-convergence or undefined statistic.
   */
  BW_STATUS_NUMERICAL = 3,
  BW_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  BW_STATUS_PANIC = 5,
} BwStatus;

/**
 * Opaque data table.
 */
typedef struct BwData BwData;

/**
 * Opaque trained model.
 */
typedef struct BwModel BwModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *bw_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *bw_version(void);

/**
 * Load a CSV file with a header row; empty cells are missing.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum BwStatus bw_data_load_csv(const char *path, struct BwData **out_data);

/**
 * Build a table from column-major `values` (`n_rows * n_cols`, NaN = missing).
 *
 * # Safety
 * `names` must hold `n_cols` nul-terminated strings and `values` must hold
 * `n_rows * n_cols` doubles.
 */
enum BwStatus bw_data_from_columns(const char *const *names,
                                   const double *values,
                                   size_t n_rows,
                                   size_t n_cols,
                                   struct BwData **out_data);

/**
 * Release a table. Null is ignored.
 *
 * # Safety
 * `data` must come from this library and not be used afterwards.
 */
void bw_data_free(struct BwData *data);

/**
 * # Safety
 * `data` must be a live handle; `n_rows` and `n_cols` writable.
 */
enum BwStatus bw_data_shape(const struct BwData *data, size_t *n_rows, size_t *n_cols);

/**
 * Read one cell; missing cells yield NaN.
 *
 * # Safety
 * `data` must be a live handle and `value` writable.
 */
enum BwStatus bw_data_get(const struct BwData *data, size_t row, size_t col, double *value);

/**
 * Number of missing cells in the table.
 *
 * # Safety
 * `data` must be a live handle and `count` writable.
 */
enum BwStatus bw_data_missing_count(const struct BwData *data, size_t *count);

/**
 * Index of a named column.
 *
 * # Safety
 * `data` must be a live handle, `name` nul-terminated and `index` writable.
 */
enum BwStatus bw_data_column_index(const struct BwData *data, const char *name, size_t *index);

/**
 * # Safety
 * `data` must be a live handle and `path` nul-terminated.
 */
enum BwStatus bw_data_write_csv(const struct BwData *data, const char *path);

/**
 * Complete every missing cell with the default hybrid imputer.
 *
 * # Safety
 * `data` must be a live handle and `out_data` writable.
 */
enum BwStatus bw_impute(const struct BwData *data, uint64_t seed, struct BwData **out_data);

/**
 * Generate a synthetic cohort of `n` rows. A positive `noise_sd` is used as
 * is; otherwise the noise is calibrated to a reference R^2 of 0.62.
 *
 * # Safety
 * `out_data` must be writable.
 */
enum BwStatus bw_synth_cohort(size_t n, uint64_t seed, double noise_sd, struct BwData **out_data);

/**
 * Fit a model of the named family with default hyperparameters, using every
 * column except `target` as a feature. The table must be complete.
 *
 * # Safety
 * `data` must be a live handle, `target` and `family` nul-terminated and
 * `out_model` writable.
 */
enum BwStatus bw_model_train(const struct BwData *data,
                             const char *target,
                             const char *family,
                             uint64_t seed,
                             struct BwModel **out_model);

/**
 * Predict every row of `data` into `predictions` (length `len`, which must
 * equal the row count). Columns are matched by name; extra columns such as
 * the target are ignored.
 *
 * # Safety
 * `model` and `data` must be live handles and `predictions` must hold `len`
 * doubles.
 */
enum BwStatus bw_model_predict(const struct BwModel *model,
                               const struct BwData *data,
                               double *predictions,
                               size_t len);

/**
 * Number of features the model expects.
 *
 * # Safety
 * `model` must be a live handle and `count` writable.
 */
enum BwStatus bw_model_n_features(const struct BwModel *model, size_t *count);

/**
 * # Safety
 * `model` must be a live handle and `path` nul-terminated.
 */
enum BwStatus bw_model_save(const struct BwModel *model, const char *path);

/**
 * # Safety
 * `path` must be nul-terminated and `out_model` writable.
 */
enum BwStatus bw_model_load(const char *path, struct BwModel **out_model);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void bw_model_free(struct BwModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BWML_H */

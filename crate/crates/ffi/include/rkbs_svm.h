#ifndef RKBS_SVM_H
#define RKBS_SVM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum RkbsStatus {
  RKBS_STATUS_OK = 0,
  RKBS_STATUS_NULL_POINTER = 1,
  RKBS_STATUS_INVALID_ARGUMENT = 2,
  RKBS_STATUS_INVALID_DATA = 3,
  RKBS_STATUS_NUMERIC_RANGE = 4,
  RKBS_STATUS_RESOURCE_LIMIT = 5,
  RKBS_STATUS_UNSUPPORTED = 6,
  RKBS_STATUS_CONSISTENCY = 7,
  RKBS_STATUS_SINGULAR = 8,
  /**
   * The solver stopped early; the best iterate is still returned.
   */
  RKBS_STATUS_NON_CONVERGENCE = 9,
  RKBS_STATUS_CONFIG = 10,
  RKBS_STATUS_IO = 11,
  RKBS_STATUS_PANIC = 12,
} RkbsStatus;

/**
 * Opaque trained model.
 */
typedef struct RkbsModel RkbsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rkbs_last_error_message(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library, not yet freed.
 */
void rkbs_string_free(char *s);

/**
 * Frees a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle obtained from this library, not yet freed.
 */
void rkbs_model_free(struct RkbsModel *model);

/**
 * Trains on `n_points` row-major points of dimension `dim` with real
 * `labels`, configured by a run-configuration JSON document. On
 * [`RkbsStatus::Ok`] and [`RkbsStatus::NonConvergence`] a model is stored in
 * `*out_model`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string, `points` must hold
 * `n_points * dim` doubles, `labels` `n_points` doubles, and `out_model` must
 * be writable.
 */
enum RkbsStatus rkbs_train(const char *config_json,
                           const double *points,
                           const double *labels,
                           uintptr_t n_points,
                           uintptr_t dim,
                           struct RkbsModel **out_model);

/**
 * Parses a model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_model` writable.
 */
enum RkbsStatus rkbs_model_from_json(const char *json, struct RkbsModel **out_model);

/**
 * Serializes a model; free the result with [`rkbs_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out_json` writable.
 */
enum RkbsStatus rkbs_model_to_json(const struct RkbsModel *model, char **out_json);

/**
 * Exponent, input dimension and number of centers.
 *
 * # Safety
 * `model` must be a live handle; each output pointer may be null.
 */
enum RkbsStatus rkbs_model_info(const struct RkbsModel *model,
                                uintptr_t *out_p,
                                uintptr_t *out_dim,
                                uintptr_t *out_centers,
                                int *out_converged);

/**
 * Norm of the model function.
 *
 * # Safety
 * `model` must be a live handle and `out_norm` writable.
 */
enum RkbsStatus rkbs_model_norm(const struct RkbsModel *model, double *out_norm);

/**
 * Evaluates the model at `n_points` row-major points of the model's
 * dimension, writing real and imaginary parts.
 *
 * # Safety
 * `points` must hold `n_points * dim` doubles; `out_re` and `out_im` must
 * each have room for `n_points` doubles.
 */
enum RkbsStatus rkbs_model_predict(const struct RkbsModel *model,
                                   const double *points,
                                   uintptr_t n_points,
                                   double *out_re,
                                   double *out_im);

/**
 * Normalized Matérn kernel with spectral density `(θ² + |ω|²)^{-n}` at `x`.
 *
 * # Safety
 * `x` must hold `dim` doubles and `out_value` must be writable.
 */
enum RkbsStatus rkbs_kernel_evaluate(double theta,
                                     double degree,
                                     uintptr_t dim,
                                     const double *x,
                                     double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RKBS_SVM_H */

#ifndef ISOCAL_H
#define ISOCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum IsocalStatus {
  ISOCAL_STATUS_OK = 0,
  // A required pointer argument was null.
  ISOCAL_STATUS_NULL_POINTER = 1,
  // An argument was out of range (length, enum value, non-UTF-8 path).
  ISOCAL_STATUS_INVALID_ARGUMENT = 2,
  // Reading or writing a file failed.
  ISOCAL_STATUS_IO = 3,
  // A file could not be parsed.
  ISOCAL_STATUS_PARSE = 4,
  // Inputs violate a documented invariant.
  ISOCAL_STATUS_VALIDATION = 5,
  // Inputs disagree in size or subject alignment.
  ISOCAL_STATUS_ALIGNMENT = 6,
  // Model fitting or projection failed.
  ISOCAL_STATUS_NUMERICAL = 7,
  // A metric is undefined for the inputs.
  ISOCAL_STATUS_UNDEFINED_METRIC = 8,
  // An internal panic was caught.
  ISOCAL_STATUS_PANIC = 9,
} IsocalStatus;

// Calibration estimators, passed as `uint32_t`.
typedef enum IsocalMethod {
  ISOCAL_METHOD_RW = 0,
  ISOCAL_METHOD_RW_PLUS = 1,
  ISOCAL_METHOD_HT = 2,
  ISOCAL_METHOD_HT_PLUS = 3,
  ISOCAL_METHOD_DR = 4,
} IsocalMethod;

// Risk interpolation between calibration rows, passed as `uint32_t`.
typedef enum IsocalInterpolation {
  ISOCAL_INTERPOLATION_BILINEAR = 0,
  ISOCAL_INTERPOLATION_STEP = 1,
} IsocalInterpolation;

// A fitted Cox proportional hazards model.
typedef struct IsocalCoxModel IsocalCoxModel;

// A calibrated survival surface.
typedef struct IsocalSurface IsocalSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *isocal_version(void);

// Copies the calling thread's last error message into `buffer` (always
// NUL-terminated when `capacity > 0`, truncated if needed) and returns the
// full message length in bytes, excluding the terminator. Returns 0 when
// the last call succeeded.
//
// # Safety
// `buffer` must be null or point to `capacity` writable bytes.
size_t isocal_last_error_message(char *buffer, size_t capacity);

// Weighted least-squares non-increasing fit of `y` (pool adjacent
// violators). `weights` may be null for unit weights. Writes `n` values.
//
// # Safety
// `y`, `out` (and `weights` if non-null) must point to `n` doubles.
enum IsocalStatus isocal_pava_nonincreasing(const double *y,
                                            const double *weights,
                                            size_t n,
                                            double *out);

// Euclidean projection of a row-major `rows x cols` matrix onto matrices
// non-increasing along both rows and columns.
//
// # Safety
// `matrix` and `out` must point to `rows * cols` doubles.
enum IsocalStatus isocal_project_doubly_monotone(const double *matrix,
                                                 size_t rows,
                                                 size_t cols,
                                                 double *out);

// Harrell's concordance index; `events` holds 0/1 flags.
//
// # Safety
// `risks`, `times` and `events` must point to `n` elements.
enum IsocalStatus isocal_c_index(const double *risks,
                                 const double *times,
                                 const uint8_t *events,
                                 size_t n,
                                 double *out);

// True survival probability `S(t | x)` in simulation `setting` (1 to 6).
//
// # Safety
// `x` must point to `p` doubles, the setting's covariate count.
enum IsocalStatus isocal_oracle_survival(uint8_t setting,
                                         const double *x,
                                         size_t p,
                                         double t,
                                         double *out);

// Fits a Cox model by Newton-Raphson with an optional ridge penalty.
// `covariates` is row-major `n x p`.
//
// # Safety
// Array arguments must have the stated lengths; `out` must be writable.
enum IsocalStatus isocal_cox_fit(const double *times,
                                 const uint8_t *events,
                                 const double *covariates,
                                 size_t n,
                                 size_t p,
                                 double ridge,
                                 struct IsocalCoxModel **out);

// Number of coefficients (covariates) of `model`, or 0 for null.
//
// # Safety
// `model` must be null or a live handle.
size_t isocal_cox_num_coefficients(const struct IsocalCoxModel *model);

// Copies the coefficients and their standard errors (either may be null).
//
// # Safety
// Non-null outputs must hold `isocal_cox_num_coefficients(model)` doubles.
enum IsocalStatus isocal_cox_coefficients(const struct IsocalCoxModel *model,
                                          double *coefficients,
                                          double *standard_errors);

// Survival curve `exp(-Lambda0(t) exp(risk))` for covariates `x` at
// increasing positive `times`, floored at `clip_floor`.
//
// # Safety
// `x` must hold the model's coefficient count; `times` and `out` `k`.
enum IsocalStatus isocal_cox_survival(const struct IsocalCoxModel *model,
                                      const double *x,
                                      const double *times,
                                      size_t k,
                                      double clip_floor,
                                      double *out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void isocal_cox_free(struct IsocalCoxModel *model);

// Calibrates risk scores against observed outcomes.
//
// `times`, `events`, `risks` describe the `n` calibration subjects.
// `grid` holds `k` increasing positive times, which must include every
// observed event time. `survival` (required for the DR method, otherwise
// may be null) and `censoring` are row-major `n x k` tables of the
// initial event and censoring survival curves at the grid times.
// `method` is an [`IsocalMethod`], `interpolation` an
// [`IsocalInterpolation`].
//
// # Safety
// Array arguments must have the stated lengths; `out` must be writable.
enum IsocalStatus isocal_surface_fit(const double *times,
                                     const uint8_t *events,
                                     const double *risks,
                                     size_t n,
                                     const double *grid,
                                     size_t k,
                                     const double *survival,
                                     const double *censoring,
                                     uint32_t method,
                                     uint32_t interpolation,
                                     struct IsocalSurface **out);

// Loads a surface saved by this library or the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum IsocalStatus isocal_surface_load(const char *path, struct IsocalSurface **out);

// Writes `surface` as JSON, creating parent directories.
//
// # Safety
// `surface` must be a live handle and `path` NUL-terminated.
enum IsocalStatus isocal_surface_save(const struct IsocalSurface *surface, const char *path);

// Number of calibration rows and grid times of `surface`.
//
// # Safety
// `surface` must be a live handle; outputs may be null.
enum IsocalStatus isocal_surface_dims(const struct IsocalSurface *surface,
                                      size_t *rows,
                                      size_t *times);

// Calibrated survival probability at each `(risks[i], times[i])`.
//
// # Safety
// `risks`, `times` and `out` must point to `m` doubles.
enum IsocalStatus isocal_surface_predict(const struct IsocalSurface *surface,
                                         const double *risks,
                                         const double *times,
                                         size_t m,
                                         double *out);

// Releases a surface; null is ignored.
//
// # Safety
// `surface` must be null or a handle not yet freed.
void isocal_surface_free(struct IsocalSurface *surface);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISOCAL_H */

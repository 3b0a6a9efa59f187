#ifndef NOISEREG_H
#define NOISEREG_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NrStatus {
  NR_STATUS_OK = 0,
  NR_STATUS_NULL_POINTER = 1,
  NR_STATUS_INVALID_ARGUMENT = 2,
  NR_STATUS_INVALID_PARAMS = 3,
  NR_STATUS_DOMAIN = 4,
  NR_STATUS_NUMERICAL = 5,
  NR_STATUS_EXPERIMENT = 6,
  NR_STATUS_IO = 7,
  NR_STATUS_PANIC = 8,
} NrStatus;

/**
 * Integration scheme selector.
 */
typedef enum NrScheme {
  NR_SCHEME_TAMED_EULER_ITO = 0,
  NR_SCHEME_EULER_ITO = 1,
  NR_SCHEME_HEUN_STRATONOVICH = 2,
  NR_SCHEME_Y_EULER_ADDITIVE = 3,
  NR_SCHEME_ODE_ADAPTIVE = 4,
  NR_SCHEME_HYBRID_TAMED_Y = 5,
} NrScheme;

/**
 * Opaque model handle: parameters plus the power drift `κ|x|^{m-1}x`.
 */
typedef struct NrModel NrModel;

/**
 * Explosion fraction with its Wilson 95% interval.
 */
typedef struct NrFraction {
  size_t count;
  size_t n;
  double estimate;
  double lo;
  double hi;
} NrFraction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nr_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated
 * to `len`). Returns the full message length without the terminator, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nr_last_error_message(char *buf, size_t len);

/**
 * Creates a model with the power drift. Other parameters take their defaults
 * (`C = 1`, `λ = 1`, `x_max = 1e8`). Fails with `InvalidParams` when the admissibility
 * conditions do not hold.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum NrStatus nr_model_new(size_t d,
                           double m,
                           double eta,
                           double kappa,
                           double r_switch,
                           struct NrModel **out);

/**
 * Creates a model from a TOML run configuration (the `model` and `drift` sections).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum NrStatus nr_model_from_config(const char *toml, struct NrModel **out);

/**
 * # Safety
 * `model` must be null or a handle returned by this library, not yet freed.
 */
void nr_model_free(struct NrModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
size_t nr_model_dim(const struct NrModel *model);

/**
 * Writes `σ(x)` row-major into `out` (`d·d` values).
 *
 * # Safety
 * `x` must hold `d` values and `out` room for `d·d`.
 */
enum NrStatus nr_model_sigma(const struct NrModel *model, const double *x, size_t d, double *out);

/**
 * Writes the Itô drift `b + ½ Σ (∂σ)σ` at `x` into `out`.
 *
 * # Safety
 * `x` and `out` must each hold `d` values.
 */
enum NrStatus nr_model_ito_drift(const struct NrModel *model,
                                 const double *x,
                                 size_t d,
                                 double *out);

/**
 * `φ(x) = x/|x|^{η+1}`; `Domain` at the origin.
 *
 * # Safety
 * `x` and `out` must each hold `d` values.
 */
enum NrStatus nr_phi(double eta, const double *x, size_t d, double *out);

/**
 * Inverse of `nr_phi`.
 *
 * # Safety
 * `y` and `out` must each hold `d` values.
 */
enum NrStatus nr_phi_inv(double eta, const double *y, size_t d, double *out);

/**
 * Blow-up time `r0^{1-m}/(κ(m-1))` of `x' = κ|x|^{m-1}x`.
 */
double nr_power_blowup_time(double kappa, double m, double r0);

/**
 * Radius beyond which the generator applied to `V = (log|x|)^α` is negative.
 *
 * # Safety
 * `model` must be a live handle and `r_star` writable.
 */
enum NrStatus nr_negativity_radius(const struct NrModel *model, double alpha, double *r_star);

/**
 * Fraction of `n_paths` paths from `x0` reaching `x_max` before `t_end`.
 *
 * # Safety
 * `x0` must hold `d` values and `out` be writable.
 */
enum NrStatus nr_explosion_probability(const struct NrModel *model,
                                       enum NrScheme scheme,
                                       double dt0,
                                       double t_end,
                                       const double *x0,
                                       size_t d,
                                       size_t n_paths,
                                       uint64_t seed,
                                       struct NrFraction *out);

/**
 * Runs acceptance criterion `id` (1–13) and stores whether it passed.
 *
 * # Safety
 * `passed` must be writable.
 */
enum NrStatus nr_run_criterion(uint32_t id, uint64_t seed, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOISEREG_H */

#ifndef MFMD_H
#define MFMD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Classical dynamics used by [`mfmd_classical_correlation`].
 */
typedef enum MfmdDynamics {
  MFMD_DYNAMICS_MEAN_FIELD = 0,
  MFMD_DYNAMICS_EXCITED_STATE = 1,
  MFMD_DYNAMICS_GROUND_STATE = 2,
} MfmdDynamics;

typedef enum MfmdObservable {
  MFMD_OBSERVABLE_MOMENTUM = 0,
  MFMD_OBSERVABLE_POSITION = 1,
} MfmdObservable;

/**
 * Result code of every exported function.
 */
typedef enum MfmdStatus {
  MFMD_STATUS_OK = 0,
  /**
   * A parameter was out of range or inconsistent.
   */
  MFMD_STATUS_INVALID_ARGUMENT = 1,
  /**
   * An iterative method failed or a consistency audit tripped.
   */
  MFMD_STATUS_NUMERICAL_FAILURE = 2,
  /**
   * The computational domain is too small, or the model is singular there.
   */
  MFMD_STATUS_DOMAIN_ERROR = 3,
  /**
   * A required pointer was `NULL`.
   */
  MFMD_STATUS_NULL_POINTER = 4,
  /**
   * An internal panic was caught.
   */
  MFMD_STATUS_PANIC = 5,
} MfmdStatus;

/**
 * Two-state model parameters: `beta`, `c`, `delta` and the mass ratio `M`.
 */
typedef struct MfmdModel MfmdModel;

/**
 * Eigendecomposition of the discretized Hamiltonian of a model on a grid.
 */
typedef struct MfmdQuantum MfmdQuantum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or an empty
 * string. The pointer stays valid until the next failing call on the thread.
 */
const char *mfmd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfmd_version(void);

/**
 * Creates a model from explicit parameters.
 */
enum MfmdStatus mfmd_model_new(double beta,
                               double c,
                               double delta,
                               double mass_ratio,
                               struct MfmdModel **out_model);

/**
 * Creates a model from one of the presets `'A'` to `'E'`.
 */
enum MfmdStatus mfmd_model_from_case(char label, double mass_ratio, struct MfmdModel **out_model);

/**
 * Releases a model. `NULL` is accepted.
 */
void mfmd_model_free(struct MfmdModel *model);

/**
 * Eigenvalues `lambda_0 <= lambda_1` of the potential matrix at `x`.
 */
enum MfmdStatus mfmd_model_eigenvalues(const struct MfmdModel *model,
                                       double x,
                                       double *out_l0,
                                       double *out_l1);

/**
 * Mean-field potential and its derivative at `x`.
 */
enum MfmdStatus mfmd_model_mean_field(const struct MfmdModel *model,
                                      double x,
                                      double *out_value,
                                      double *out_gradient);

/**
 * Ground and excited state probabilities `q0`, `q1` and the error
 * functionals `eps1^2`, `eps2^2`, `gamma_lambda` on `[x_min, x_max]` with
 * `k` segments. Any of the out-pointers may be `NULL` to skip that value.
 */
enum MfmdStatus mfmd_model_diagnostics(const struct MfmdModel *model,
                                       double x_min,
                                       double x_max,
                                       size_t k,
                                       double *out_q1,
                                       double *out_eps1_sq,
                                       double *out_eps2_sq,
                                       double *out_gamma_lambda);

/**
 * Builds and diagonalizes the finite-difference Hamiltonian of `model` on
 * `[x_min, x_max]` with `k` segments. The cost grows like `k^2` in memory
 * and `k^3` in time.
 */
enum MfmdStatus mfmd_quantum_new(const struct MfmdModel *model,
                                 double x_min,
                                 double x_max,
                                 size_t k,
                                 struct MfmdQuantum **out_quantum);

/**
 * Releases a quantum solver. `NULL` is accepted.
 */
void mfmd_quantum_free(struct MfmdQuantum *quantum);

/**
 * Matrix dimension (twice the number of grid nodes).
 */
enum MfmdStatus mfmd_quantum_dim(const struct MfmdQuantum *quantum, size_t *out_dim);

/**
 * Copies the lowest `len` eigenvalues (ascending) into `out_values`.
 */
enum MfmdStatus mfmd_quantum_eigenvalues(const struct MfmdQuantum *quantum,
                                         double *out_values,
                                         size_t len);

/**
 * Normalized equilibrium position density at the `k + 1` grid nodes;
 * `len` must equal `k + 1`.
 */
enum MfmdStatus mfmd_quantum_density(const struct MfmdQuantum *quantum,
                                     double *out_values,
                                     size_t len);

/**
 * Symmetrized quantum auto-correlation at `n` times; `which` is an
 * [`MfmdObservable`] code. `taus` must start at
 * 0 and increase strictly.
 */
enum MfmdStatus mfmd_quantum_correlation(const struct MfmdQuantum *quantum,
                                         int32_t which,
                                         const double *taus,
                                         size_t n,
                                         double *out_values);

/**
 * Classical auto-correlation for an [`MfmdDynamics`] code and an
 * [`MfmdObservable`] code, on the phase grid `[x_min, x_max] x [-p_max, p_max]`
 * with `segments` (even) intervals per axis and Verlet step `dt`. Every tau
 * must be a multiple of `dt`.
 */
enum MfmdStatus mfmd_classical_correlation(const struct MfmdModel *model,
                                           int32_t dynamics_code,
                                           int32_t which,
                                           double x_min,
                                           double x_max,
                                           double p_max,
                                           size_t segments,
                                           double dt,
                                           const double *taus,
                                           size_t n,
                                           double *out_values);

/**
 * Monte Carlo estimate of `M (rho - exp(-beta H))` at `(x, p)`. The three
 * output arrays receive 4 entries each in row-major order (11, 12, 21, 22):
 * real part, imaginary part and standard error.
 */
enum MfmdStatus mfmd_gibbs_correction(const struct MfmdModel *model,
                                      double x,
                                      double p,
                                      size_t n_paths,
                                      size_t n_steps,
                                      uint64_t seed,
                                      double *out_re,
                                      double *out_im,
                                      double *out_std_err);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFMD_H */

#ifndef SPECTRAL_MIXING_H
#define SPECTRAL_MIXING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Basis codes.
 */
#define SM_BASIS_SINE 0

#define SM_BASIS_COSINE 1

/**
 * Velocity norm held at one.
 */
#define SM_CONSTRAINT_L2 0

#define SM_CONSTRAINT_H1 1

/**
 * Result of every fallible call.
 */
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_NULL_POINTER = 1,
  SM_STATUS_INVALID_INPUT = 2,
  SM_STATUS_DIMENSION_MISMATCH = 3,
  SM_STATUS_BASIS_MISMATCH = 4,
  SM_STATUS_CAPACITY = 5,
  SM_STATUS_LINKAGE = 6,
  SM_STATUS_INFEASIBLE_INIT = 7,
  SM_STATUS_UNSTABLE = 8,
  SM_STATUS_STEP_TOO_LARGE = 9,
  SM_STATUS_BOUND_VIOLATION = 10,
  SM_STATUS_IO = 11,
  SM_STATUS_PANIC = 12,
} SmStatus;

/**
 * Diffusion plus tensor-driven advection.
 */
typedef struct SmOperator SmOperator;

/**
 * Coupling tensors for one basis and truncation.
 */
typedef struct SmTensors SmTensors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t sm_last_error_message(char *buf, uintptr_t len);

/**
 * Builds the coupling tensors for `n` scalar and `m` velocity modes per axis.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`sm_tensors_free`].
 */
enum SmStatus sm_tensors_build(int basis, uintptr_t n, uintptr_t m, struct SmTensors **out);

/**
 * Number of stored (nonzero) tensor entries.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
uintptr_t sm_tensors_len(const struct SmTensors *t);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void sm_tensors_free(struct SmTensors *t);

/**
 * Computes `K` and `K_hat`.
 *
 * # Safety
 * `t` must be a live handle, `k` and `k_hat` valid pointers.
 */
enum SmStatus sm_tensors_bound_constants(const struct SmTensors *t, double *k, double *k_hat);

/**
 * Samples `trials` feasible velocities and checks every advection entry
 * against its bound. Fails with `SM_STATUS_BOUND_VIOLATION` on a violation.
 *
 * # Safety
 * `t` must be a live handle, the outputs valid pointers.
 */
enum SmStatus sm_tensors_verify_bounds(const struct SmTensors *t,
                                       uintptr_t trials,
                                       int constraint,
                                       uint64_t seed,
                                       double *observed_max,
                                       double *bound);

/**
 * Operator over shared tensors with diffusivity `kappa`. The tensors handle
 * may be freed afterwards.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum SmStatus sm_operator_new(const struct SmTensors *t, double kappa, struct SmOperator **out);

/**
 * # Safety
 * `op` must be null or a handle not yet freed.
 */
void sm_operator_free(struct SmOperator *op);

/**
 * Length of the state vector.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
uintptr_t sm_operator_dim(const struct SmOperator *op);

/**
 * Length of the `alpha` vector (`M * M`).
 *
 * # Safety
 * `op` must be null or a live handle.
 */
uintptr_t sm_operator_control_len(const struct SmOperator *op);

/**
 * Writes the `dim x dim` advection matrix for `alpha` into `out` (row-major).
 *
 * # Safety
 * `alpha` must hold `alpha_len` values and `out` `out_len` writable values.
 */
enum SmStatus sm_operator_advection(const struct SmOperator *op,
                                    const double *alpha,
                                    uintptr_t alpha_len,
                                    double *out,
                                    uintptr_t out_len);

/**
 * Integrates from `a0` over `[0, t_final]` with step `dt` under the constant
 * velocity `alpha` and writes the final state into `out`.
 *
 * # Safety
 * `alpha`, `a0` and `out` must hold `alpha_len`, `dim` and `dim` values.
 */
enum SmStatus sm_simulate(const struct SmOperator *op,
                          const double *alpha,
                          uintptr_t alpha_len,
                          const double *a0,
                          double *out,
                          uintptr_t dim,
                          double t_final,
                          double dt);

/**
 * The feasible `alpha` maximizing the instantaneous decay of the gradient
 * energy at state `a`. `degenerate` is set to 1 when the decay does not
 * depend on the velocity at this state.
 *
 * # Safety
 * `a` must hold `dim` values, `alpha_out` `alpha_len` writable values.
 */
enum SmStatus sm_greedy_control(const struct SmOperator *op,
                                const double *a,
                                uintptr_t dim,
                                int constraint,
                                double *alpha_out,
                                uintptr_t alpha_len,
                                int *degenerate);

/**
 * Gradient energy `||grad phi||^2` of a state.
 *
 * # Safety
 * `a` must hold `dim` values and `q` be valid.
 */
enum SmStatus sm_gradient_energy(const struct SmOperator *op,
                                 const double *a,
                                 uintptr_t dim,
                                 double *q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRAL_MIXING_H */

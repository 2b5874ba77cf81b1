#ifndef CVQP_H
#define CVQP_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvqpErrorCode {
  CVQP_ERROR_CODE_OK = 0,
  CVQP_ERROR_CODE_NULL_POINTER = 1,
  CVQP_ERROR_CODE_INVALID_ARGUMENT = 2,
  CVQP_ERROR_CODE_PARSE = 3,
  CVQP_ERROR_CODE_PANIC = 4,
} CvqpErrorCode;

typedef enum CvqpSolveStatus {
  CVQP_SOLVE_STATUS_OPTIMAL = 0,
  CVQP_SOLVE_STATUS_MAX_ITERATIONS = 1,
  CVQP_SOLVE_STATUS_TIME_LIMIT = 2,
  CVQP_SOLVE_STATUS_INFEASIBLE_INPUT = 3,
} CvqpSolveStatus;

// Opaque problem handle.
typedef struct CvqpProblem CvqpProblem;

// Opaque result handle.
typedef struct CvqpResult CvqpResult;

// Opaque settings handle.
typedef struct CvqpSettings CvqpSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL if none.
//
// The pointer stays valid until the next failing call on the same thread.
const char *cvqp_last_error_message(void);

// Parses a problem from a NUL-terminated JSON document.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a writable pointer.
enum CvqpErrorCode cvqp_problem_from_json(const char *json, struct CvqpProblem **out);

// Builds a problem from dense row-major arrays.
//
// `P` is `n x n`, `A` is `m x n`, `B` is `p x n`; `l` and `u` have `p`
// entries and may hold infinities. Arrays of length zero may be NULL.
//
// # Safety
// Every non-null pointer must reference at least the stated number of
// doubles, and `out` must be writable.
enum CvqpErrorCode cvqp_problem_new_dense(size_t n,
                                          size_t m,
                                          size_t p,
                                          const double *P,
                                          const double *q,
                                          const double *A,
                                          const double *B,
                                          const double *l,
                                          const double *u,
                                          double beta,
                                          double kappa,
                                          struct CvqpProblem **out);

// Writes the variable count, scenario count and side-constraint count.
//
// # Safety
// `problem` must be a live handle; the output pointers may be NULL.
enum CvqpErrorCode cvqp_problem_dims(const struct CvqpProblem *problem,
                                     size_t *n,
                                     size_t *m,
                                     size_t *p);

// # Safety
// `problem` must be NULL or a handle not yet freed.
void cvqp_problem_free(struct CvqpProblem *problem);

// Default solver settings; free with `cvqp_settings_free`.
struct CvqpSettings *cvqp_settings_default(void);

// # Safety
// `settings` must be NULL or a handle not yet freed.
void cvqp_settings_free(struct CvqpSettings *settings);

// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_tolerances(struct CvqpSettings *settings,
                                                double eps_abs,
                                                double eps_rel);

// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_rho0(struct CvqpSettings *settings, double rho0);

// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_alpha(struct CvqpSettings *settings, double alpha);

// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_max_iter(struct CvqpSettings *settings, size_t max_iter);

// A nonpositive `seconds` removes the limit.
//
// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_time_limit(struct CvqpSettings *settings, double seconds);

// # Safety
// `settings` must be a live handle.
enum CvqpErrorCode cvqp_settings_set_adaptive_rho(struct CvqpSettings *settings, int enabled);

// Solves `problem`. A NULL `settings` means defaults.
//
// A limit being hit is not an error: check `cvqp_result_status`.
//
// # Safety
// `problem` must be a live handle, `settings` NULL or a live handle, and
// `out` writable.
enum CvqpErrorCode cvqp_solve(const struct CvqpProblem *problem,
                              const struct CvqpSettings *settings,
                              struct CvqpResult **out);

// # Safety
// `result` must be NULL or a handle not yet freed.
void cvqp_result_free(struct CvqpResult *result);

// # Safety
// `result` must be a live handle.
enum CvqpSolveStatus cvqp_result_status(const struct CvqpResult *result);

// # Safety
// `result` must be a live handle.
double cvqp_result_objective(const struct CvqpResult *result);

// # Safety
// `result` must be a live handle.
size_t cvqp_result_iterations(const struct CvqpResult *result);

// Length of the solution vector.
//
// # Safety
// `result` must be a live handle.
size_t cvqp_result_n(const struct CvqpResult *result);

// Copies the solution into `x`, which holds `len` doubles.
//
// # Safety
// `result` must be a live handle and `x` must hold `len` doubles.
enum CvqpErrorCode cvqp_result_x(const struct CvqpResult *result, double *x, size_t len);

// Final primal and dual residual norms and their tolerances.
//
// # Safety
// `result` must be a live handle; the output pointers may be NULL.
enum CvqpErrorCode cvqp_result_residuals(const struct CvqpResult *result,
                                         double *r_norm,
                                         double *s_norm,
                                         double *eps_pri,
                                         double *eps_dual);

// Projects `v` onto `{z : cvar_beta(z) <= kappa}`, writing `m` values to `out`.
//
// # Safety
// `v` and `out` must each hold `m` doubles; they may alias.
enum CvqpErrorCode cvqp_project_cvar(const double *v,
                                     size_t m,
                                     double beta,
                                     double kappa,
                                     double *out);

// Projects `v` onto `{z : sum of the k largest entries <= d}`.
//
// # Safety
// `v` and `out` must each hold `m` doubles; they may alias.
enum CvqpErrorCode cvqp_project_sum_k_largest(const double *v,
                                              size_t m,
                                              size_t k,
                                              double d,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVQP_H */

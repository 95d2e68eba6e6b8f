#ifndef GEVREY_KIT_H
#define GEVREY_KIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_INVALID_ARGUMENT = 1,
  GK_STATUS_NUMERICAL = 2,
  GK_STATUS_BOUND_VIOLATION = 3,
  GK_STATUS_NULL_POINTER = 4,
  GK_STATUS_BUFFER_TOO_SMALL = 5,
  GK_STATUS_PANIC = 6,
} GkStatus;

/**
 * A configured 1D problem and, after [`gk_problem_solve`], its solution.
 */
typedef struct GkProblem GkProblem;

/**
 * `(|α|!)^s · scale · rate^{|α|}`
 */
typedef struct GkEnvelope {
  double s;
  double scale;
  double rate;
} GkEnvelope;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gk_version(void);

/**
 * Copies the message of the last failed call on this thread. An empty
 * string means the last call succeeded.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `len` must be writable.
 */
enum GkStatus gk_last_error_message(char *buf, size_t cap, size_t *len);

/**
 * `κ_n` in decimal.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `len` must be writable.
 */
enum GkStatus gk_kappa(size_t n, char *buf, size_t cap, size_t *len);

/**
 * Solution-map envelope from the stability constant `alpha ≥ 1` and a
 * residual envelope with `scale, rate ≥ 1`.
 *
 * # Safety
 * `residual` must be readable and `out` writable.
 */
enum GkStatus gk_implicit_envelope(double alpha,
                                   const struct GkEnvelope *residual,
                                   struct GkEnvelope *out);

/**
 * Guaranteed radius of convergence `1/rate` of an analytic (`s = 1`) envelope.
 *
 * # Safety
 * `env` must be readable and `out` writable.
 */
enum GkStatus gk_convergence_radius(const struct GkEnvelope *env, double *out);

/**
 * Envelope of `outer ∘ inner`.
 *
 * # Safety
 * `inner` and `outer` must be readable and `out` writable.
 */
enum GkStatus gk_compose_envelopes(const struct GkEnvelope *inner,
                                   const struct GkEnvelope *outer,
                                   struct GkEnvelope *out);

/**
 * Parses a problem config (same JSON schema as the `solve` subcommand) and
 * validates it. Release the handle with [`gk_problem_free`].
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum GkStatus gk_problem_new_from_json(const char *json, struct GkProblem **out);

/**
 * Number of mesh nodes, the length of the arrays filled by [`gk_problem_solve`].
 *
 * # Safety
 * `problem` must come from [`gk_problem_new_from_json`]; `out` writable.
 */
enum GkStatus gk_problem_num_nodes(const struct GkProblem *problem, size_t *out);

/**
 * Solves and copies node positions and nodal values into `x` and `u`, each
 * holding `cap` doubles. Returns `GK_STATUS_BOUND_VIOLATION` when the
 * solution was computed but one of the a priori or stability checks failed.
 *
 * # Safety
 * `problem` must come from [`gk_problem_new_from_json`]; `x` and `u` must
 * hold `cap` doubles.
 */
enum GkStatus gk_problem_solve(struct GkProblem *problem, double *x, double *u, size_t cap);

/**
 * JSON report of the last [`gk_problem_solve`].
 *
 * # Safety
 * `problem` must come from [`gk_problem_new_from_json`]; `buf` must hold
 * `cap` bytes and `len` be writable.
 */
enum GkStatus gk_problem_report_json(const struct GkProblem *problem,
                                     char *buf,
                                     size_t cap,
                                     size_t *len);

/**
 * # Safety
 * `problem` must come from [`gk_problem_new_from_json`] and not be used
 * afterwards. Null is ignored.
 */
void gk_problem_free(struct GkProblem *problem);

/**
 * Runs the parametric bound check (same JSON schema as `verify-bounds`) and
 * copies its CSV. `*passed` is set to 1 or 0; a failed check also returns
 * `GK_STATUS_BOUND_VIOLATION` after the CSV has been written.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `buf` must hold `cap` bytes; `len`
 * and `passed` must be writable.
 */
enum GkStatus gk_verify_bounds_json(const char *config_json,
                                    char *buf,
                                    size_t cap,
                                    size_t *len,
                                    int *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEVREY_KIT_H */

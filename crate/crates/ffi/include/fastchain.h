#ifndef FASTCHAIN_H
#define FASTCHAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_INVALID_INPUT = 1,
  FC_STATUS_NUMERIC_FAILURE = 2,
  FC_STATUS_BUDGET_EXCEEDED = 3,
  FC_STATUS_NULL_POINTER = 4,
  FC_STATUS_PANIC = 5,
} FcStatus;

typedef struct FcGenerator FcGenerator;

typedef struct FcGraph FcGraph;

typedef struct FcProbability FcProbability;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *fc_last_error_message(void);

/**
 * `edges` holds `edge_count` pairs `(from, to)`.
 */
enum FcStatus fc_graph_new(size_t n, const size_t *edges, size_t edge_count, struct FcGraph **out);

void fc_graph_free(struct FcGraph *g);

enum FcStatus fc_pi_new(const double *weights, size_t n, struct FcProbability **out);

void fc_pi_free(struct FcProbability *p);

/**
 * `rates` is an `n x n` row-major generator matrix.
 */
enum FcStatus fc_generator_new(size_t n, const double *rates, struct FcGenerator **out);

void fc_generator_free(struct FcGenerator *l);

/**
 * Number of states, or 0 for a null handle.
 */
size_t fc_generator_dim(const struct FcGenerator *l);

/**
 * Copies the `n x n` rates into `out`, which must hold `len >= n*n` values.
 */
enum FcStatus fc_generator_rates(const struct FcGenerator *l, double *out, size_t len);

/**
 * The generator moving along `cycle` with rates `1 / (len * pi(a))`.
 */
enum FcStatus fc_cycle_generator(const struct FcProbability *pi,
                                 const size_t *cycle,
                                 size_t len,
                                 struct FcGenerator **out);

enum FcStatus fc_invariant_measure(const struct FcGenerator *l, struct FcProbability **out);

/**
 * Expected hitting time between two independent `pi`-distributed states.
 */
enum FcStatus fc_inverse_speed(const struct FcGenerator *l,
                               const struct FcProbability *pi,
                               double *out);

/**
 * Sum of `1 / lambda` over the nonzero eigenvalues of `-L`.
 */
enum FcStatus fc_eigentime_spectral(const struct FcGenerator *l, double *out);

/**
 * `out[x * n + y] = E_x[tau_y]`; `out` must hold `len >= n*n` values.
 */
enum FcStatus fc_expected_hitting_times(const struct FcGenerator *l,
                                        const struct FcProbability *pi,
                                        double *out,
                                        size_t len);

/**
 * Minimizes the inverse speed over normalized `pi`-invariant generators
 * supported on `g`. `out_generator` may be NULL.
 */
enum FcStatus fc_optimize(const struct FcGraph *g,
                          const struct FcProbability *pi,
                          uint64_t seed,
                          double *out_f,
                          struct FcGenerator **out_generator);

/**
 * Closed-form optimum on the path `0 - 1 - 2`; `pi` has three entries.
 * `out_p` receives the weight on the two-cycle `(0, 1)`.
 */
enum FcStatus fc_s2_closed_form(const double *pi, double *out_f, double *out_p);

/**
 * Discrete covering cost from `start`; with `full_set` the walk must also
 * return to `start`.
 */
enum FcStatus fc_dp_discrete_value(const struct FcGraph *g,
                                   size_t start,
                                   bool full_set,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FASTCHAIN_H */

#ifndef REWARDOT_H
#define REWARDOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_INVALID_ARGUMENT = 1,
  RW_STATUS_NUMERIC_FAILURE = 2,
  RW_STATUS_GENERATION_FAILURE = 3,
  RW_STATUS_PARSE = 4,
  RW_STATUS_IO = 5,
  RW_STATUS_NULL_POINTER = 6,
  RW_STATUS_PANIC = 7,
} RwStatus;

/**
 * A probability vector.
 */
typedef struct RwMeasure RwMeasure;

/**
 * A ground metric on `size` points.
 */
typedef struct RwMetric RwMetric;

/**
 * A state-action reward table.
 */
typedef struct RwReward RwReward;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rw_last_error(void);

/**
 * Copies `len` weights into a new measure. They must be nonnegative and sum to one.
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
enum RwStatus rw_measure_new(const double *weights, size_t len, struct RwMeasure **out);

/**
 * Number of support points, or 0 for a null handle.
 *
 * # Safety
 * `measure` must be null or a live handle.
 */
size_t rw_measure_len(const struct RwMeasure *measure);

/**
 * Copies the weights into `out`, which must hold `len` doubles where
 * `len` equals [`rw_measure_len`].
 *
 * # Safety
 * `measure` must be a live handle and `out` must point to `len` writable doubles.
 */
enum RwStatus rw_measure_weights(const struct RwMeasure *measure, double *out, size_t len);

/**
 * # Safety
 * `measure` must be null or a handle not yet freed.
 */
void rw_measure_free(struct RwMeasure *measure);

/**
 * Builds a metric from a row-major `size × size` cost matrix.
 *
 * # Safety
 * `costs` must point to `size * size` readable doubles; `out` must be writable.
 */
enum RwStatus rw_metric_new(const double *costs, size_t size, struct RwMetric **out);

/**
 * Gridworld metric on state-action pairs: Manhattan distance between cells
 * plus `action_penalty` when the actions differ. Five actions per cell.
 *
 * # Safety
 * `out` must be writable.
 */
enum RwStatus rw_metric_gridworld(size_t width,
                                  size_t height,
                                  double action_penalty,
                                  struct RwMetric **out);

/**
 * Number of support points, or 0 for a null handle.
 *
 * # Safety
 * `metric` must be null or a live handle.
 */
size_t rw_metric_size(const struct RwMetric *metric);

/**
 * # Safety
 * `metric` must be null or a handle not yet freed.
 */
void rw_metric_free(struct RwMetric *metric);

/**
 * Copies a row-major `num_states × num_actions` reward table.
 *
 * # Safety
 * `values` must point to `num_states * num_actions` readable doubles; `out` must be writable.
 */
enum RwStatus rw_reward_new(const double *values,
                            size_t num_states,
                            size_t num_actions,
                            struct RwReward **out);

/**
 * # Safety
 * `reward` must be null or a handle not yet freed.
 */
void rw_reward_free(struct RwReward *reward);

/**
 * Softmax embedding of a reward table at `temperature`.
 *
 * # Safety
 * `reward` must be a live handle; `out` must be writable.
 */
enum RwStatus rw_phi_embed(const struct RwReward *reward,
                           double temperature,
                           struct RwMeasure **out);

/**
 * Exact p-Wasserstein distance.
 *
 * # Safety
 * Handles must be live; `out_distance` must be writable.
 */
enum RwStatus rw_exact_distance(const struct RwMeasure *a,
                                const struct RwMeasure *b,
                                const struct RwMetric *metric,
                                double order_p,
                                double *out_distance);

/**
 * Entropic estimate `⟨γ_ε, cost^p⟩^(1/p)`. Both measures must be strictly
 * positive. `out_converged` may be null.
 *
 * # Safety
 * Handles must be live; `out_value` must be writable.
 */
enum RwStatus rw_sinkhorn_distance(const struct RwMeasure *a,
                                   const struct RwMeasure *b,
                                   const struct RwMetric *metric,
                                   double order_p,
                                   double reg_epsilon,
                                   size_t max_iterations,
                                   double convergence_tol,
                                   double *out_value,
                                   bool *out_converged);

/**
 * Set member minimizing the summed exact distance to all members.
 *
 * # Safety
 * `items` must point to `count` live handles; out pointers must be writable.
 */
enum RwStatus rw_medoid(const struct RwMeasure *const *items,
                        size_t count,
                        const struct RwMetric *metric,
                        double order_p,
                        size_t *out_index,
                        double *out_objective);

/**
 * Entropic barycenter with nonnegative `weights` summing to one.
 * `out_converged` may be null.
 *
 * # Safety
 * `items` must point to `count` live handles and `weights` to `count`
 * doubles; `out` must be writable.
 */
enum RwStatus rw_barycenter(const struct RwMeasure *const *items,
                            const double *weights,
                            size_t count,
                            const struct RwMetric *metric,
                            double order_p,
                            double reg_epsilon,
                            size_t max_iterations,
                            double convergence_tol,
                            struct RwMeasure **out,
                            bool *out_converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REWARDOT_H */

#ifndef LAPLACE_FORGE_H
#define LAPLACE_FORGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum LfStatus {
  LF_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LF_NULL_POINTER = 1,
  /**
   * Invalid input: bad dimensions, infeasible budget, non-finite data, short buffer.
   */
  LF_DOMAIN = 2,
  /**
   * An iterative solver stopped before reaching its tolerance.
   */
  LF_NOT_CONVERGED = 3,
  /**
   * An internal panic was caught at the boundary.
   */
  LF_PANIC = 4,
} LfStatus;

/**
 * Opaque edge selection over the complete graph on `n` nodes.
 */
typedef struct LfSelection LfSelection;

/**
 * Opaque N x L signal matrix.
 */
typedef struct LfSignal LfSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *lf_last_error_message(void);

/**
 * Copies `n * l` row-major values into a new signal handle.
 *
 * # Safety
 * `data` must point to `n * l` readable doubles; `out` must be writable.
 */
enum LfStatus lf_signal_new(const double *data, size_t n, size_t l, struct LfSignal **out);

/**
 * # Safety
 * `signal` must be null or a handle from this library not yet freed.
 */
void lf_signal_free(struct LfSignal *signal);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t lf_signal_rows(const struct LfSignal *signal);

/**
 * Snapshot count, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t lf_signal_cols(const struct LfSignal *signal);

/**
 * Writes the signal row-major into `out`, which holds `len` doubles.
 *
 * # Safety
 * `signal` must be a live handle; `out` must point to `len` writable doubles.
 */
enum LfStatus lf_signal_copy(const struct LfSignal *signal, double *out, size_t len);

/**
 * Rank-ordering learner: the `k` pairs with the smallest squared differences.
 *
 * # Safety
 * `signal` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_learn_noiseless(const struct LfSignal *signal, size_t k, struct LfSelection **out);

/**
 * Alternating minimization from a seeded random start. `max_iter` of 0 keeps
 * the default. `out_denoised` and `out_converged` may be null.
 *
 * # Safety
 * `signal` must be a live handle; non-null output pointers must be writable.
 */
enum LfStatus lf_learn_altmin(const struct LfSignal *signal,
                              size_t k,
                              double gamma,
                              uint64_t seed,
                              size_t max_iter,
                              struct LfSelection **out,
                              struct LfSignal **out_denoised,
                              bool *out_converged);

/**
 * Convex relaxation with top-K rounding. `out_denoised`, `out_gap` and
 * `out_converged` may be null.
 *
 * # Safety
 * `signal` must be a live handle; non-null output pointers must be writable.
 */
enum LfStatus lf_learn_relax(const struct LfSignal *signal,
                             size_t k,
                             double gamma,
                             struct LfSelection **out,
                             struct LfSignal **out_denoised,
                             double *out_gap,
                             bool *out_converged);

/**
 * Tikhonov denoising of `signal` on `selection`.
 *
 * # Safety
 * `signal` and `selection` must be live handles; `out` must be writable.
 */
enum LfStatus lf_denoise(const struct LfSignal *signal,
                         const struct LfSelection *selection,
                         double gamma,
                         struct LfSignal **out);

/**
 * # Safety
 * `selection` must be null or a handle from this library not yet freed.
 */
void lf_selection_free(struct LfSelection *selection);

/**
 * Number of edges with non-zero weight, or 0 for a null handle.
 *
 * # Safety
 * `selection` must be null or a live handle.
 */
size_t lf_selection_num_edges(const struct LfSelection *selection);

/**
 * Writes the selected edges as endpoint pairs `i < j` with weights, in edge
 * index order. `weights` may be null; the arrays hold `capacity` entries.
 *
 * # Safety
 * `selection` must be a live handle; the arrays must hold `capacity` writable entries.
 */
enum LfStatus lf_selection_edges(const struct LfSelection *selection,
                                 size_t *first,
                                 size_t *second,
                                 double *weights,
                                 size_t capacity);

/**
 * Lexicographic index of the pair `(i, j)`, `i < j`, among the `n (n - 1) / 2`
 * candidate edges.
 *
 * # Safety
 * `out` must be writable.
 */
enum LfStatus lf_edge_index(size_t n, size_t i, size_t j, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAPLACE_FORGE_H */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CCE_H
#define CCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CceStatus {
  CCE_STATUS_OK = 0,
  // A required pointer argument was NULL.
  CCE_STATUS_NULL_POINTER = 1,
  // A scalar argument is out of range.
  CCE_STATUS_INVALID_ARGUMENT = 2,
  // A vector or matrix row is not a probability distribution.
  CCE_STATUS_INVALID_DISTRIBUTION = 3,
  // Dimensions of the arguments disagree.
  CCE_STATUS_SHAPE_MISMATCH = 4,
  // An iterative solver hit its iteration cap without converging.
  CCE_STATUS_NO_CONVERGENCE = 5,
  // File could not be read or written.
  CCE_STATUS_IO = 6,
  // File contents are malformed.
  CCE_STATUS_PARSE = 7,
  // Internal panic; the library state is still usable.
  CCE_STATUS_PANIC = 8,
} CceStatus;

typedef enum CceSolverStatus {
  CCE_SOLVER_STATUS_CONVERGED = 0,
  CCE_SOLVER_STATUS_MAX_ITERATIONS = 1,
  CCE_SOLVER_STATUS_DIVERGED = 2,
} CceSolverStatus;

// Objective passed to [`cce_pgd_optimize`].
typedef enum CceLossVariant {
  // Collision CE with `KL(ybar || u)`.
  CCE_LOSS_VARIANT_CCE = 0,
  // Collision CE with `KL(u || ybar)`.
  CCE_LOSS_VARIANT_CCE_PLUS = 1,
  // Shannon CE with `KL(ybar || u)`.
  CCE_LOSS_VARIANT_SHANNON_KL = 2,
} CceLossVariant;

// Opaque linear softmax model.
typedef struct CceModel CceModel;

// Summary of an EM or projected-gradient run.
typedef struct CceSolverReport {
  size_t iterations;
  double wall_seconds;
  double objective;
  // Largest entry change of the last iteration.
  double last_step;
  enum CceSolverStatus status;
} CceSolverReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or NULL if none.
// The pointer stays valid until the next failed call on the same thread.
const char *cce_last_error(void);

// Library version as a static NUL-terminated string.
const char *cce_version(void);

// `H(p)`. `p` must be a distribution of length `k`.
//
// # Safety
// `p` must point to `k` readable doubles and `out` to one writable double.
enum CceStatus cce_shannon_entropy(const double *p, size_t k, double *out);

// `H₂(p) = −ln Σ p²`.
//
// # Safety
// As for [`cce_shannon_entropy`].
enum CceStatus cce_collision_entropy(const double *p, size_t k, double *out);

// Rényi entropy of order `alpha` (positive, not 1).
//
// # Safety
// As for [`cce_shannon_entropy`].
enum CceStatus cce_renyi_entropy(const double *p, size_t k, double alpha, double *out);

// `H(p, q)`; may be `+inf`.
//
// # Safety
// `p` and `q` must each point to `k` readable doubles, `out` to one writable
// double.
enum CceStatus cce_shannon_cross_entropy(const double *p, const double *q, size_t k, double *out);

// `H₂(p, q) = −ln Σ p_k q_k`; may be `+inf`.
//
// # Safety
// As for [`cce_shannon_cross_entropy`].
enum CceStatus cce_collision_cross_entropy(const double *p, const double *q, size_t k, double *out);

// `KL(p ‖ q)`; may be `+inf`.
//
// # Safety
// As for [`cce_shannon_cross_entropy`].
enum CceStatus cce_kl_divergence(const double *p, const double *q, size_t k, double *out);

// Rényi divergence of order `alpha`.
//
// # Safety
// As for [`cce_shannon_cross_entropy`].
enum CceStatus cce_renyi_divergence(const double *p,
                                    const double *q,
                                    size_t k,
                                    double alpha,
                                    double *out);

// Solves one M-step: minimizes `−ln σᵀy − λ Σ_k w_k ln y_k` over the simplex.
// `support_weights` holds `u_k S_k` (non-negative, not all zero).
// `newton_iters_out` may be NULL.
//
// # Safety
// `sigma` and `support_weights` must point to `k` readable doubles, `y_out`
// to `k` writable doubles.
enum CceStatus cce_mstep_solve(const double *sigma,
                               const double *support_weights,
                               size_t k,
                               double lambda,
                               double *y_out,
                               size_t *newton_iters_out);

// EM on collision CE with `KL(u ‖ ȳ)`, `u` uniform. `predictions` and
// `warm_start` are `m × k`; the result is written to `y_out` (`m × k`).
// `report_out` may be NULL.
//
// # Safety
// `predictions`, `warm_start` and `y_out` must each point to `m·k` doubles.
enum CceStatus cce_em_optimize(const double *predictions,
                               const double *warm_start,
                               size_t m,
                               size_t k,
                               double lambda,
                               size_t max_iters,
                               double rel_tol,
                               double *y_out,
                               struct CceSolverReport *report_out);

// Projected gradient on the chosen objective with uniform prior. Arguments
// as for [`cce_em_optimize`].
//
// # Safety
// As for [`cce_em_optimize`].
enum CceStatus cce_pgd_optimize(const double *predictions,
                                const double *warm_start,
                                size_t m,
                                size_t k,
                                enum CceLossVariant variant,
                                double lambda,
                                double step_size,
                                size_t max_iters,
                                double rel_tol,
                                double *y_out,
                                struct CceSolverReport *report_out);

// New `k`-class model on `n` features with seeded random weights.
//
// # Safety
// `out` must point to a writable `CceModel*`.
enum CceStatus cce_model_new(size_t k, size_t n, uint64_t seed, struct CceModel **out);

// Loads a checkpoint written by [`cce_model_save`] or the `cce` tool.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable `CceModel*`.
enum CceStatus cce_model_load(const char *path, struct CceModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum CceStatus cce_model_save(const struct CceModel *model, const char *path);

// Releases a handle. NULL is ignored.
//
// # Safety
// `model` must be NULL or a handle not yet freed.
void cce_model_free(struct CceModel *model);

// # Safety
// `model` must be a live handle; `k_out` and `n_out` writable.
enum CceStatus cce_model_dims(const struct CceModel *model, size_t *k_out, size_t *n_out);

// Class probabilities for `m` rows of `n` features into `proba_out`
// (`m × k`).
//
// # Safety
// `x` must point to `m·n` doubles and `proba_out` to `m·k` writable doubles.
enum CceStatus cce_model_predict_proba(const struct CceModel *model,
                                       const double *x,
                                       size_t m,
                                       size_t n,
                                       double *proba_out);

// Most probable class per row into `labels_out` (`m` entries).
//
// # Safety
// `x` must point to `m·n` doubles and `labels_out` to `m` writable `size_t`.
enum CceStatus cce_model_predict(const struct CceModel *model,
                                 const double *x,
                                 size_t m,
                                 size_t n,
                                 size_t *labels_out);

// Accuracy after the optimal one-to-one matching of clusters to classes.
//
// # Safety
// `pred` and `truth` must point to `m` readable `size_t`; `out` writable.
enum CceStatus cce_clustering_accuracy(const size_t *pred,
                                       const size_t *truth,
                                       size_t m,
                                       double *out);

// Normalized mutual information. `degenerate_out` (may be NULL) is set to 1
// when either labeling has a single block.
//
// # Safety
// As for [`cce_clustering_accuracy`].
enum CceStatus cce_nmi(const size_t *pred,
                       const size_t *truth,
                       size_t m,
                       double *out,
                       int32_t *degenerate_out);

// Adjusted Rand index, with the same conventions as [`cce_nmi`].
//
// # Safety
// As for [`cce_clustering_accuracy`].
enum CceStatus cce_ari(const size_t *pred,
                       const size_t *truth,
                       size_t m,
                       double *out,
                       int32_t *degenerate_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCE_H */

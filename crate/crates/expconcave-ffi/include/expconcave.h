#ifndef EXPCONCAVE_H
#define EXPCONCAVE_H

/* Generated by cbindgen from expconcave-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Online learner selector for the regret bound evaluator.
typedef enum {
  EXPC_LEARNER_OGD = 0,
  EXPC_LEARNER_ONS = 1,
  EXPC_LEARNER_EWOO = 2,
} ExpcLearner;

// Result codes returned by every entry point.
typedef enum {
  EXPC_OK = 0,
  EXPC_NULL_POINTER = 1,
  EXPC_INVALID_INPUT = 2,
  EXPC_PRECONDITION = 3,
  EXPC_CONVERGENCE = 4,
  EXPC_UNSUPPORTED_DIMENSION = 5,
  EXPC_PANIC = 6,
} ExpcStatus;

// Opaque convex-domain handle.
typedef struct ExpcDomain ExpcDomain;

// Opaque loss-model handle.
typedef struct ExpcLoss ExpcLoss;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code.
const char *expc_status_message(ExpcStatus status);

// Squared loss `(y - <f, x>)^2` with diameter bound `b`.
//
// # Safety
// `out` must point to writable storage for one pointer.
ExpcStatus expc_loss_new_squared(double b, ExpcLoss **out);

// Logistic loss `log(1 + exp(-y <f, x>))` with diameter bound `b`.
//
// # Safety
// `out` must point to writable storage for one pointer.
ExpcStatus expc_loss_new_logistic(double b, ExpcLoss **out);

// Exp-concavity rate carried by the loss.
//
// # Safety
// `loss` must be a live handle; `out` must be writable.
ExpcStatus expc_loss_eta(const ExpcLoss *loss, double *out);

// # Safety
// `loss` must be a handle from one of the constructors, not yet freed.
void expc_loss_free(ExpcLoss *loss);

// L2 ball of the given center and radius.
//
// # Safety
// `center` must point to `dim` doubles; `out` must be writable.
ExpcStatus expc_domain_new_l2_ball(const double *center,
                                   uintptr_t dim,
                                   double radius,
                                   ExpcDomain **out);

// Axis-aligned box with per-coordinate bounds.
//
// # Safety
// `lo` and `hi` must point to `dim` doubles; `out` must be writable.
ExpcStatus expc_domain_new_box(const double *lo, const double *hi, uintptr_t dim, ExpcDomain **out);

// Probability simplex with `dim` coordinates.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_domain_new_simplex(uintptr_t dim, ExpcDomain **out);

// # Safety
// `domain` must be a handle from one of the constructors, not yet freed.
void expc_domain_free(ExpcDomain *domain);

// Euclidean projection of `point` onto the domain, written to `out`
// (`dim` doubles).
//
// # Safety
// `point` and `out` must point to `dim` doubles; `domain` must be live.
ExpcStatus expc_domain_project(const ExpcDomain *domain,
                               const double *point,
                               uintptr_t dim,
                               double *out);

// Empirical risk minimization over the domain; the fitted hypothesis is
// written to `out_hypothesis` (`dim` doubles). `max_iters = 0` and
// `tol = 0` select the defaults.
//
// # Safety
// `xs` must point to `n * dim` doubles (row-major), `ys` to `n` doubles,
// and `out_hypothesis` to `dim` writable doubles; the handles must be live.
ExpcStatus expc_erm_fit(const ExpcLoss *loss,
                        const ExpcDomain *domain,
                        const double *xs,
                        const double *ys,
                        uintptr_t n,
                        uintptr_t dim,
                        uintptr_t max_iters,
                        double tol,
                        double *out_hypothesis);

// Two-phase confidence boost with ERM as the base learner; the selected
// hypothesis is written to `out_hypothesis` and the index of the chosen
// phase-I candidate to `out_chosen`.
//
// # Safety
// Pointer contracts as in [`expc_erm_fit`]; `out_chosen` must be writable.
ExpcStatus expc_confidence_boost_erm(const ExpcLoss *loss,
                                     const ExpcDomain *domain,
                                     const double *xs,
                                     const double *ys,
                                     uintptr_t n,
                                     uintptr_t dim,
                                     double delta,
                                     double *out_hypothesis,
                                     uintptr_t *out_chosen);

// High-probability ERM excess-risk bound.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_erm_whp_bound(double b,
                              double eta,
                              double l,
                              double r,
                              uintptr_t d,
                              uintptr_t n,
                              double delta,
                              double *out);

// Confidence-boost bound with `psi(m) = psi_coeff / m`.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_meta_bound(double psi_coeff,
                           double c,
                           double q,
                           double b,
                           uintptr_t n,
                           double delta,
                           double *out);

// Online-to-batch excess-risk bound from realized regret.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_o2b_excess_bound(double regret,
                                 double eta,
                                 double b,
                                 uintptr_t n,
                                 double delta,
                                 double *out);

// Worst-case regret bound of an online learner over `n` rounds.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_regret_bound(ExpcLearner learner,
                             double eta,
                             double g,
                             double d_bound,
                             double nu,
                             uintptr_t dim,
                             double n,
                             double *out);

// Finite-class ERM selection threshold under a Bernstein condition.
//
// # Safety
// `out` must be writable.
ExpcStatus expc_erm_selection_threshold(double c,
                                        double q,
                                        double b,
                                        uintptr_t class_size,
                                        uintptr_t n,
                                        double delta,
                                        double *out);

// Prior-weighted redundancy of a finite class: the infimum value and the
// concentrated-posterior upper bound.
//
// # Safety
// `prior` and `excess` must point to `len` doubles; the out-pointers must
// be writable.
ExpcStatus expc_bayes_redundancy(const double *prior,
                                 const double *excess,
                                 uintptr_t len,
                                 double eta,
                                 uintptr_t horizon,
                                 double *out_value,
                                 double *out_concentrated);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EXPCONCAVE_H */

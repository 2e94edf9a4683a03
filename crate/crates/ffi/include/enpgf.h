#ifndef ENPGF_H
#define ENPGF_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EnpgfPerturbation {
  /**
   * Gamma(shape = count, rate = 1) draws.
   */
  ENPGF_PERTURBATION_POISSON_MATCHED = 0,
  /**
   * Draws with mean count and unit variance.
   */
  ENPGF_PERTURBATION_UNIT_VARIANCE = 1,
} EnpgfPerturbation;

typedef enum EnpgfStatus {
  ENPGF_STATUS_OK = 0,
  ENPGF_STATUS_INVALID_ARGUMENT = 1,
  ENPGF_STATUS_NULL_POINTER = 2,
  ENPGF_STATUS_NON_FINITE = 3,
  /**
   * A panic or other unexpected failure inside the library.
   */
  ENPGF_STATUS_INTERNAL = 4,
} EnpgfStatus;

/**
 * Opaque filter handle.
 */
typedef struct EnpgfFilter EnpgfFilter;

/**
 * Filter settings. Obtain defaults from [`enpgf_filter_options_default`].
 */
typedef struct EnpgfFilterOptions {
  size_t ensemble_size;
  double dt;
  uint64_t seed;
  double positivity_floor;
  enum EnpgfPerturbation perturbation;
} EnpgfFilterOptions;

/**
 * Mean and variance of a gamma prior.
 */
typedef struct EnpgfGamma {
  double mean;
  double variance;
} EnpgfGamma;

typedef struct EnpgfPriors {
  struct EnpgfGamma baseline;
  struct EnpgfGamma decay;
  struct EnpgfGamma excitation;
} EnpgfPriors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into the library from this thread.
 */
const char *enpgf_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *enpgf_version(void);

struct EnpgfFilterOptions enpgf_filter_options_default(void);

/**
 * Draws an initial ensemble over `m` nodes from `priors` and stores a new
 * filter in `*out`.
 *
 * # Safety
 * `priors` and `options` must point to valid structs and `out` to writable
 * storage for one pointer.
 */
enum EnpgfStatus enpgf_filter_new(size_t m,
                                  const struct EnpgfPriors *priors,
                                  const struct EnpgfFilterOptions *options,
                                  struct EnpgfFilter **out);

/**
 * Releases a filter. Null is ignored.
 *
 * # Safety
 * `f` must come from [`enpgf_filter_new`] and not be used afterwards.
 */
void enpgf_filter_free(struct EnpgfFilter *f);

/**
 * Number of nodes.
 *
 * # Safety
 * `f` must be a live handle or null.
 */
size_t enpgf_filter_nodes(const struct EnpgfFilter *f);

/**
 * Number of bins assimilated so far.
 *
 * # Safety
 * `f` must be a live handle or null.
 */
size_t enpgf_filter_step(const struct EnpgfFilter *f);

/**
 * Assimilates `n_steps` consecutive count vectors of length `m`, stored
 * row-major in `counts`. On failure the filter keeps the state reached
 * after the last successful bin.
 *
 * # Safety
 * `f` must be a live handle and `counts` must hold `n_steps * m` values.
 */
enum EnpgfStatus enpgf_filter_assimilate(struct EnpgfFilter *f,
                                         const uint64_t *counts,
                                         size_t n_steps,
                                         size_t m);

/**
 * Ensemble mean of node `node`'s parameters: baseline, decay, then the `m`
 * excitations of that node. `out` must hold `m + 2` values.
 *
 * # Safety
 * `f` must be a live handle and `out` writable for `len` values.
 */
enum EnpgfStatus enpgf_filter_param_mean(const struct EnpgfFilter *f,
                                         size_t node,
                                         double *out,
                                         size_t len);

/**
 * Ensemble-mean excitation matrix, `m * m` values row-major.
 *
 * # Safety
 * `f` must be a live handle and `out` writable for `len` values.
 */
enum EnpgfStatus enpgf_filter_alpha_mean(const struct EnpgfFilter *f, double *out, size_t len);

/**
 * Ensemble-mean intensity of every node, `m` values.
 *
 * # Safety
 * `f` must be a live handle and `out` writable for `len` values.
 */
enum EnpgfStatus enpgf_filter_intensity_mean(const struct EnpgfFilter *f, double *out, size_t len);

/**
 * Gamma-conjugate posterior of an intensity with prior `mean` and relative
 * variance `rel_var` after `dn` events in a bin of length `dt`.
 *
 * # Safety
 * `out_mean` and `out_rel_var` must be writable.
 */
enum EnpgfStatus enpgf_analytic_posterior(double mean,
                                          double rel_var,
                                          uint64_t dn,
                                          double dt,
                                          double *out_mean,
                                          double *out_rel_var);

/**
 * One deterministic intensity step: `out` receives the intensities of bin
 * `k + 1` given `lambda` and the counts of bin `k`.
 *
 * # Safety
 * `mu`, `beta`, `lambda`, `counts` and `out` must hold `m` values and
 * `alpha` `m * m`.
 */
enum EnpgfStatus enpgf_step_intensity(size_t m,
                                      const double *mu,
                                      const double *beta,
                                      const double *alpha,
                                      const double *lambda,
                                      const uint64_t *counts,
                                      double dt,
                                      double *out);

/**
 * Simulates `n_steps` bins of the Hawkes process; `out` receives the counts
 * row-major, `n_steps * m` values.
 *
 * # Safety
 * `mu` and `beta` must hold `m` values, `alpha` `m * m` and `out`
 * `n_steps * m`.
 */
enum EnpgfStatus enpgf_simulate(size_t m,
                                const double *mu,
                                const double *beta,
                                const double *alpha,
                                double dt,
                                size_t n_steps,
                                uint64_t seed,
                                uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENPGF_H */

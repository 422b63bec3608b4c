#ifndef CONSTRUCTIVE_H
#define CONSTRUCTIVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CFT_OK 0

/**
 * Bad arguments, null pointers or invalid UTF-8.
 */
#define CFT_ERR_USAGE 2

/**
 * Domain, connectivity, structure or fit failures.
 */
#define CFT_ERR_DOMAIN 3

#define CFT_ERR_SIZE_LIMIT 4

#define CFT_ERR_NUMERIC 5

#define CFT_ERR_SINGULARITY 6

#define CFT_ERR_IO 7

#define CFT_ERR_PANIC 8

#define CFT_GRAPH_DIVERGENT_TADPOLE 0

#define CFT_GRAPH_CONVERGENT_TADPOLE 1

#define CFT_GRAPH_LINEAR_VACUUM 2

#define CFT_GRAPH_LOG_VACUUM 3

#define CFT_GROWTH_BOUNDED 0

#define CFT_GROWTH_LOGARITHMIC 1

#define CFT_GROWTH_LINEAR 2

#define CFT_CARDIOID_STANDARD 0

#define CFT_CARDIOID_EXTENDED 1

#define CFT_CARDIOID_UNIFORM_HALF_DISK 2

/**
 * Result of one CLI command run in-process.
 */
typedef struct CftReport CftReport;

/**
 * Power series with real coefficients.
 */
typedef struct CftSeries CftSeries;

/**
 * Complex tensor with `side^rank` entries.
 */
typedef struct CftTensor CftTensor;

typedef struct CftWeightCheck {
  uintptr_t trees;
  /**
   * Exact rational weights sum to one.
   */
  bool sums_to_one;
  /**
   * Enumeration and integral routes give identical rationals for every tree.
   */
  bool routes_agree;
} CftWeightCheck;

typedef struct CftRemainderFit {
  double k;
  double sigma;
  double residual;
  double k_envelope;
} CftRemainderFit;

typedef struct CftLveSum {
  double re;
  double im;
  double tail_bound;
  double std_error;
} CftLveSum;

typedef struct CftPowerCount {
  /**
   * One of the `CFT_GROWTH_*` values.
   */
  int32_t growth;
  double difference_ratio;
  double log_fit_residual;
} CftPowerCount;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cft_version(void);

/**
 * Message for the last failed call on this thread, or null if the last call succeeded.
 * Valid until the next call into the library from the same thread.
 */
const char *cft_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cft_string_free(char *s);

/**
 * Runs one command from a TOML configuration in the format read by `--config`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
int32_t cft_run_toml(const char *config, struct CftReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
int32_t cft_report_record_count(const struct CftReport *report, uintptr_t *out);

/**
 * Summary object as JSON text.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
int32_t cft_report_summary_json(const struct CftReport *report, char **out);

/**
 * Full JSONL output as written by the binary.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
int32_t cft_report_jsonl(const struct CftReport *report, bool include_meta, char **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
int32_t cft_report_csv(const struct CftReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle from `cft_run_toml`, not yet freed.
 */
void cft_report_free(struct CftReport *report);

/**
 * Number of forests of the complete graph on `n` vertices, by enumeration.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_forest_count(uintptr_t n, bool accept_exponential_cost, uint64_t *out);

/**
 * Residual of the forest formula on `K_n` for the coupling table `t` of length `n(n-1)/2`.
 *
 * # Safety
 * `t` must hold `len` values; `out` must be writable.
 */
int32_t cft_forest_formula_residual(uintptr_t n,
                                    const double *t,
                                    uintptr_t len,
                                    bool accept_exponential_cost,
                                    double *out);

/**
 * Smallest eigenvalue of the forest matrix. `pairs` holds `2 * edge_count` vertex
 * indices and `w[k]` is the weight of edge `k`.
 *
 * # Safety
 * `pairs` and `w` must hold `2 * edge_count` and `edge_count` values; `out` must be writable.
 */
int32_t cft_forest_min_eigenvalue(uintptr_t n,
                                  const uintptr_t *pairs,
                                  uintptr_t edge_count,
                                  const double *w,
                                  double *out);

/**
 * Barycentric weights of every spanning tree of a connected graph, computed by the
 * ordering enumeration and by the integral route.
 *
 * # Safety
 * `pairs` must hold `2 * edge_count` values; `out` must be writable.
 */
int32_t cft_tree_weight_check(uintptr_t n,
                              const uintptr_t *pairs,
                              uintptr_t edge_count,
                              bool accept_exponential_cost,
                              struct CftWeightCheck *out);

/**
 * Number of two-level trees on `n` vertices, by enumeration.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_two_level_tree_count(uintptr_t n, bool accept_exponential_cost, uintptr_t *out);

/**
 * Perturbative series of the zero-dimensional quartic integral, `orders + 1` coefficients.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_d0_series_new(uintptr_t orders, struct CftSeries **out);

/**
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
int32_t cft_series_len(const struct CftSeries *series, uintptr_t *out);

/**
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
int32_t cft_series_coeff(const struct CftSeries *series, uintptr_t k, double *out);

/**
 * `|a_{k+1} / a_k| / k` for `k >= 1`.
 *
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
int32_t cft_series_ratio_over_n(const struct CftSeries *series, uintptr_t k, double *out);

/**
 * Sum of the first `terms` terms at `x`.
 *
 * # Safety
 * `series` must be a live handle; `re` and `im` must be writable.
 */
int32_t cft_series_partial_sum(const struct CftSeries *series,
                               double x_re,
                               double x_im,
                               uintptr_t terms,
                               double *re,
                               double *im);

/**
 * # Safety
 * `series` must be null or a handle from `cft_d0_series_new`, not yet freed.
 */
void cft_series_free(struct CftSeries *series);

/**
 * Normalized zero-dimensional quartic integral at complex coupling.
 *
 * # Safety
 * `re` and `im` must be writable.
 */
int32_t cft_d0_partition(double lambda_re, double lambda_im, double *re, double *im);

/**
 * Fits `|R_n| <= K σ^n n! |λ|^n` to `len` samples.
 *
 * # Safety
 * The three arrays must hold `len` values; `out` must be writable.
 */
int32_t cft_remainder_fit(const uintptr_t *orders,
                          const double *lambda_abs,
                          const double *remainder_abs,
                          uintptr_t len,
                          struct CftRemainderFit *out);

/**
 * Oracle two-point function of the O(N) model at real `z < 0`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_lve_oracle_g2(double z, uint64_t n, double *out);

/**
 * `G2 - Σ_{k<order} g_k z^k` against the oracle.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_lve_taylor_remainder(double z, uint64_t n, uintptr_t order, double *out);

/**
 * Closed-form large-N two-point function.
 *
 * # Safety
 * `re` and `im` must be writable.
 */
int32_t cft_catalan_g2(double z_re, double z_im, double *re, double *im);

/**
 * Loop vertex expansion truncated at `n_max`. `n = 0` selects N = ∞; `samples` and
 * `seed` drive the Monte Carlo orders.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_lve_partial_sum(double z_re,
                            double z_im,
                            uint64_t n,
                            uintptr_t n_max,
                            uint64_t samples,
                            uint64_t seed,
                            struct CftLveSum *out);

/**
 * Uniform bound on the resolvent norm at coupling `λ`; infinite on the cut.
 */
double cft_resolvent_bound(double lambda_re, double lambda_im);

/**
 * # Safety
 * `out` must be writable.
 */
int32_t cft_cardioid_contains(double lambda_re, double lambda_im, int32_t variant, bool *out);

/**
 * Oracle `log Z` of the sliced toy model with slices `j_min..=j_max` and scale `m`.
 *
 * # Safety
 * `re` and `im` must be writable.
 */
int32_t cft_mlve_oracle_log_z(uint64_t m,
                              uint32_t j_min,
                              uint32_t j_max,
                              double lambda_re,
                              double lambda_im,
                              double *re,
                              double *im);

/**
 * Multiscale expansion of `log Z` truncated at `n_max` vertices.
 *
 * # Safety
 * `re` and `im` must be writable.
 */
int32_t cft_mlve_truncated_log_z(uint64_t m,
                                 uint32_t j_min,
                                 uint32_t j_max,
                                 double lambda_re,
                                 double lambda_im,
                                 uintptr_t n_max,
                                 bool accept_exponential_cost,
                                 double *re,
                                 double *im);

/**
 * Largest `|det|` among the fermionic minors and terms of random two-level trees on `n`
 * vertices, with random interpolation weights and slices in `1..=2`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_mlve_max_fermionic_minor(uintptr_t n, uintptr_t samples, uint64_t seed, double *out);

/**
 * Number of connected quartic invariants of rank `d`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_invariant_count(uintptr_t d, uintptr_t *out);

/**
 * Canonical color mask (bit `c - 1` for color `c`) of invariant `index`, and whether it
 * is melonic.
 *
 * # Safety
 * `mask` and `melonic` must be writable.
 */
int32_t cft_invariant_mask(uintptr_t d, uintptr_t index, uint32_t *mask, bool *melonic);

/**
 * Free-measure expectation of the invariant with color mask `mask`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_expected_invariant(uintptr_t d, uintptr_t n, uint32_t mask, double *out);

/**
 * Gaussian tensor with `E|T_n|² = N^{-(rank-1)}`, seeded.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cft_tensor_gaussian(uintptr_t rank,
                            uintptr_t side,
                            uint64_t seed,
                            bool accept_exponential_cost,
                            struct CftTensor **out);

/**
 * Tensor from row-major real and imaginary parts, `side^rank` each.
 *
 * # Safety
 * `re` and `im` must hold `len` values; `out` must be writable.
 */
int32_t cft_tensor_from_parts(uintptr_t rank,
                              uintptr_t side,
                              const double *re,
                              const double *im,
                              uintptr_t len,
                              bool accept_exponential_cost,
                              struct CftTensor **out);

/**
 * New tensor with the `side × side` matrix `u` (row-major parts) applied on `color`.
 *
 * # Safety
 * `tensor` must be a live handle; `u_re` and `u_im` must hold `side²` values; `out`
 * must be writable.
 */
int32_t cft_tensor_act(const struct CftTensor *tensor,
                       uintptr_t color,
                       const double *u_re,
                       const double *u_im,
                       struct CftTensor **out);

/**
 * `T̄·T`.
 *
 * # Safety
 * `tensor` must be a live handle; `out` must be writable.
 */
int32_t cft_tensor_norm_sqr(const struct CftTensor *tensor, double *out);

/**
 * Value of the quartic invariant with color mask `mask`.
 *
 * # Safety
 * `tensor` must be a live handle; `out` must be writable.
 */
int32_t cft_tensor_invariant(const struct CftTensor *tensor, uint32_t mask, double *out);

/**
 * # Safety
 * `tensor` must be null or a handle from this library, not yet freed.
 */
void cft_tensor_free(struct CftTensor *tensor);

/**
 * Runs the rarefaction recursion for `steps` steps from `p0` resolvents on an order-`n`
 * tree; reports the final `q` and whether every step contracted.
 *
 * # Safety
 * `final_q` and `all_contract` must be writable.
 */
int32_t cft_rarefaction(uintptr_t n,
                        uint64_t p0,
                        uintptr_t steps,
                        double *final_q,
                        bool *all_contract);

/**
 * Cutoff growth of one order-one T43 graph (`CFT_GRAPH_*`).
 *
 * # Safety
 * `cutoffs` must hold `len` values; `out` must be writable.
 */
int32_t cft_power_count(int32_t graph,
                        const uint64_t *cutoffs,
                        uintptr_t len,
                        struct CftPowerCount *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSTRUCTIVE_H */

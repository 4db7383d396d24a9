/* vcqr: varying-coefficient quantile regression with polynomial splines.
 *
 * C interface over the core library: opaque handles, status codes, and
 * rendered JSON/CSV artifacts.  All functions returning vcqr_status set a
 * thread-local message retrievable via vcqr_last_error() on failure.
 * Strings returned through char** are owned by the caller and must be
 * released with vcqr_string_free().
 */
#ifndef VCQR_VCQR_H_
#define VCQR_VCQR_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vcqr_status {
  VCQR_OK = 0,
  VCQR_ERR_INVALID_ARGUMENT = 1,
  VCQR_ERR_DATA = 2,
  VCQR_ERR_NUMERIC = 3,
  VCQR_ERR_UNKNOWN = 4
} vcqr_status;

const char* vcqr_version(void);
const char* vcqr_last_error(void);
void vcqr_string_free(char* s);

/* ---------------------------------------------------------------------- */
/* Datasets                                                                */

typedef struct vcqr_dataset vcqr_dataset;

/* x is n-by-(p+1) row major with column 0 identically 1; t_domain is NULL
 * (use the observed range of t) or a 2-element {lo, hi} covering all t. */
vcqr_status vcqr_dataset_create(size_t n, size_t p, const double* t,
                                const double* x, const double* y,
                                const double* t_domain, vcqr_dataset** out);
void vcqr_dataset_free(vcqr_dataset* dataset);
size_t vcqr_dataset_n(const vcqr_dataset* dataset);
size_t vcqr_dataset_p(const vcqr_dataset* dataset);

/* ---------------------------------------------------------------------- */
/* Model fitting                                                           */

typedef struct vcqr_fit vcqr_fit;

/* Fixed interior knots in native t units, strictly increasing, shared by
 * every coefficient. */
vcqr_status vcqr_fit_fixed(const vcqr_dataset* dataset, double tau, int degree,
                           const double* knots, size_t n_knots, vcqr_fit** out);

typedef struct vcqr_select_options {
  size_t potential_count; /* 0: guideline min(4 n^(1/5), n/4, N, 30) */
  int equispaced;         /* 0: equispaced sample quantiles of t */
  int max_iterations;     /* <= 0: default 20 */
  double add_level;       /* <= 0: default 0.95 */
  double delete_level;    /* <= 0: default 0.90 */
} vcqr_select_options;

/* Stepwise knot selection over a shared candidate set; per-coefficient knot
 * sets may differ in the selected model. */
vcqr_status vcqr_fit_select(const vcqr_dataset* dataset, double tau,
                            int degree, const vcqr_select_options* options,
                            vcqr_fit** out);

void vcqr_fit_free(vcqr_fit* fit);

size_t vcqr_fit_num_coefficients(const vcqr_fit* fit);

/* beta_j^(deriv)(t); t must lie inside the fitted range. */
vcqr_status vcqr_fit_eval(const vcqr_fit* fit, size_t coefficient, double t,
                          int deriv, double* out);

/* Fitted conditional quantile at (t, x); x has length p+1 with x[0] = 1. */
vcqr_status vcqr_fit_predict(const vcqr_fit* fit, double t, const double* x,
                             size_t len, double* out);

vcqr_status vcqr_fit_objective(const vcqr_fit* fit, double* out);

/* Selected interior knots of one coefficient.  On input *count holds the
 * capacity of out; on output the knot count.  out may be NULL to query. */
vcqr_status vcqr_fit_knots(const vcqr_fit* fit, size_t coefficient,
                           double* out, size_t* count);

vcqr_status vcqr_fit_t_range(const vcqr_fit* fit, double* lo, double* hi);

/* Central 90% range of the observed t, the default curve-report window. */
vcqr_status vcqr_fit_report_range(const vcqr_fit* fit, double* lo, double* hi);

/* Rendered artifacts (fixed schemas; see README). */
vcqr_status vcqr_fit_curves_csv(const vcqr_fit* fit, double lo, double hi,
                                size_t points, int max_deriv, char** out);
vcqr_status vcqr_fit_trace_json(const vcqr_fit* fit, char** out);
vcqr_status vcqr_fit_summary_json(const vcqr_fit* fit, char** out);

/* ---------------------------------------------------------------------- */
/* Constancy tests                                                         */

typedef struct vcqr_rao_result {
  double statistic;
  size_t df;
  double p_value;
  double p_value_chisq;
  double p_value_normal;
  double standardized;
  int calibration_used; /* 0 chi-square, 1 normal */
  int weighted;
  int scale_floored;
} vcqr_rao_result;

typedef struct vcqr_lr_result {
  double statistic;
  double p_value;
  size_t bootstrap_count;
} vcqr_lr_result;

/* Knot sets are passed flattened: knot_counts has n_sets entries and knots
 * holds their concatenation.  n_sets is 1 (shared across coefficients) or
 * p+1 (one set per coefficient). */

/* calibration: 0 chi-square, 1 normal, 2 auto (chi-square while df <= 40).
 * weighted != 0 estimates a linear scale model from median-regression
 * absolute residuals and rescales rows and response by 1/sigma_hat_i. */
vcqr_status vcqr_rao_test(const vcqr_dataset* dataset, double tau, int degree,
                          const double* knots, const size_t* knot_counts,
                          size_t n_sets, int calibration, int weighted,
                          vcqr_rao_result* result, char** report_json);

/* Likelihood-ratio-type test calibrated by the residual bootstrap. */
vcqr_status vcqr_lr_test(const vcqr_dataset* dataset, double tau, int degree,
                         const double* knots, const size_t* knot_counts,
                         size_t n_sets, size_t bootstrap_count, uint64_t seed,
                         vcqr_lr_result* result, char** report_json);

/* ---------------------------------------------------------------------- */
/* Monte Carlo power studies                                               */

/* config_json schema (README has the full story):
 * {"model":"M1","tau":0.5,"n":200,"replications":500,"error":"normal",
 *  "alternative":"sine","amplitude":1.0,"alpha":0.05,"bootstrap":200,
 *  "seed":1,"knots":{"policy":"adaptive"},"tests":["RS"],"threads":0,...}
 * Returns the power table rendered as CSV. */
vcqr_status vcqr_power_study_csv(const char* config_json, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* VCQR_VCQR_H_ */

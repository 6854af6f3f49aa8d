/* Copyright 2026 The pdcmetro Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libpdcmetro.
 *
 * Every call returns a pdcm_status. On failure pdcm_last_error() describes
 * the problem; the message is per thread and valid until the next call on
 * that thread. Angles are radians. An arity <= 0 selects perfect
 * number-resolving detectors. */

#ifndef PDCMETRO_H_
#define PDCMETRO_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PDCM_API __declspec(dllexport)
#else
#define PDCM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pdcm_status {
    PDCM_OK = 0,
    PDCM_E_DOMAIN = 1,      /* argument outside the model's domain */
    PDCM_E_UNSUPPORTED = 2, /* gain outside the validated regime */
    PDCM_E_FIT = 3,
    PDCM_E_CALIBRATION = 4,
    PDCM_E_PARSE = 5,
    PDCM_E_IO = 6,
    PDCM_E_ARGUMENT = 7, /* null pointer or bad size */
    PDCM_E_INTERNAL = 8
} pdcm_status;

PDCM_API const char *pdcm_version(void);
PDCM_API const char *pdcm_last_error(void);
PDCM_API const char *pdcm_status_name(pdcm_status status);

/* --- model ------------------------------------------------------------- */

typedef struct pdcm_model pdcm_model;

PDCM_API pdcm_status pdcm_model_create(double tau, double eta_a, double eta_b, int arity, double trunc_epsilon,
                                       pdcm_model **out);
PDCM_API void pdcm_model_destroy(pdcm_model *model);

typedef struct pdcm_model_info {
    int nmax;
    int max_clicks_a;
    int max_clicks_b;
    int arity; /* 0 for perfect counting */
} pdcm_model_info;

PDCM_API pdcm_status pdcm_model_get_info(const pdcm_model *model, pdcm_model_info *out);

typedef struct pdcm_pattern {
    int ah, av, bh, bv;
} pdcm_pattern;

PDCM_API pdcm_status pdcm_probability(const pdcm_model *model, pdcm_pattern pattern, double phi, double theta,
                                      double *out);

/* Sum of P_r over every pattern within the arities. */
PDCM_API pdcm_status pdcm_total_probability(const pdcm_model *model, double phi, double theta, double *out);

/* The nine two-click-per-path patterns, renormalized; order
 * 2002 2011 2020 1102 1111 1120 0202 0211 0220. `derivatives` may be null. */
#define PDCM_FOURFOLD_PATTERNS 9
PDCM_API const char *pdcm_fourfold_label(int index);
PDCM_API pdcm_status pdcm_fourfold(const pdcm_model *model, double phi, double theta, double *probabilities,
                                   double *derivatives);

typedef struct pdcm_mean_photons {
    double path_a;
    double path_b;
    double conditional_a;          /* 2+2 events, before loss */
    double conditional_a_detected; /* 2+2 events, reaching the detectors */
} pdcm_mean_photons;

PDCM_API pdcm_status pdcm_mean_photon_numbers(const pdcm_model *model, pdcm_mean_photons *out);

/* --- Fisher information ------------------------------------------------ */

/* Fisher information of the renormalized 2+2 family. `floored` (nullable)
 * receives the number of entries clipped at the probability floor. */
PDCM_API pdcm_status pdcm_fisher(const pdcm_model *model, double phi, double theta, double *information,
                                 int *floored);

PDCM_API pdcm_status pdcm_snl(const pdcm_model *model, double *out);

/* 1 / sqrt(<N_a^2>); +inf at zero gain. */
PDCM_API pdcm_status pdcm_heisenberg(double tau, double trunc_epsilon, double *out);

typedef struct pdcm_advantage {
    double fisher_max;
    double phi;
    double snl;
    double advantage; /* fisher_max / snl - 1 */
} pdcm_advantage;

/* Maximizes the 2+2 Fisher information over a period. */
PDCM_API pdcm_status pdcm_max_advantage(const pdcm_model *model, double theta, pdcm_advantage *out);

typedef struct pdcm_fringe_curve {
    double c0, c1, c2, phase;
    double residual_norm;
    double phase_stderr;
} pdcm_fringe_curve;

/* counts: n_angles rows of n_patterns entries, row-major. */
PDCM_API pdcm_status pdcm_fit_fringes(const double *phis, const double *counts, size_t n_angles, size_t n_patterns,
                                      pdcm_fringe_curve *curves);

typedef struct pdcm_band_options {
    int iterations;
    double lower_quantile;
    double upper_quantile;
    int poisson_noise; /* 0 resamples to the observed counts */
    uint64_t seed;
} pdcm_band_options;

PDCM_API pdcm_band_options pdcm_band_defaults(void);

/* Bootstrap band of the fitted-fringe Fisher information on `grid`. */
PDCM_API pdcm_status pdcm_fisher_band(const double *phis, const double *counts, size_t n_angles, size_t n_patterns,
                                      const double *grid, size_t n_grid, const pdcm_band_options *options,
                                      double *central, double *low, double *high);

typedef struct pdcm_ml_result {
    double information; /* 1 / (N var) */
    double standard_error;
    double mean;
    double variance;
    int ambiguous;
} pdcm_ml_result;

/* M maximum-likelihood estimates from N 2+2 events each, drawn at phi and
 * searched over [lo, hi]. */
PDCM_API pdcm_status pdcm_ml_fisher(const pdcm_model *model, double theta, double phi, int repetitions,
                                    int samples, double lo, double hi, uint64_t seed, pdcm_ml_result *out);

typedef struct pdcm_performance_point {
    double eta;
    double fisher;
    double phi_best;
    double normalized_uncertainty;
    double heisenberg;
} pdcm_performance_point;

PDCM_API pdcm_status pdcm_performance_curve(double tau, double trunc_epsilon, int arity, const double *etas,
                                            size_t n, pdcm_performance_point *out);

/* --- calibration ------------------------------------------------------- */

typedef struct pdcm_rates {
    double singles_a;
    double singles_b;
    double twofold;
} pdcm_rates;

typedef struct pdcm_calibration {
    double tau;
    double eta_a;
    double eta_b;
    double pair_probability;
    int boundary;
    int has_residuals;
    pdcm_rates residuals; /* relative, full model at the recovered parameters */
} pdcm_calibration;

PDCM_API pdcm_status pdcm_simulate_rates(const pdcm_model *model, pdcm_rates *out);
PDCM_API pdcm_status pdcm_read_rates(const char *path, pdcm_rates *out);

/* residual_arity < 0 skips the residual check. */
PDCM_API pdcm_status pdcm_calibrate(const pdcm_rates *rates, int residual_arity, pdcm_calibration *out);
PDCM_API pdcm_status pdcm_tau_from_pair_probability(double p, double *tau, int *boundary);

/* --- heralding --------------------------------------------------------- */

typedef struct pdcm_herald_cell {
    double value; /* Fisher information per photon */
    double phi;
    double fisher;
    double mean_photons;
    double acceptance;
} pdcm_herald_cell;

/* A NaN phi maximizes over phase. */
PDCM_API pdcm_status pdcm_herald(int k, double eta, double tau, double trunc_epsilon, double phi,
                                 pdcm_herald_cell *out);

/* cells: n_k rows of n_eta entries. */
PDCM_API pdcm_status pdcm_herald_table(double tau, const double *etas, size_t n_eta, const int *ks, size_t n_k,
                                       double trunc_epsilon, pdcm_herald_cell *cells);

/* --- timetags ---------------------------------------------------------- */

typedef enum pdcm_timetag_format { PDCM_TIMETAG_CSV = 0, PDCM_TIMETAG_BINARY = 1 } pdcm_timetag_format;

typedef struct pdcm_count_options {
    uint64_t window_ps;
    uint64_t period_ps; /* 0: windows anchored at their first click */
    int64_t offset_ps;  /* < 0: half a period */
    uint64_t pulses;    /* 0: inferred from the stream */
    size_t reorder_capacity;
} pdcm_count_options;

PDCM_API pdcm_count_options pdcm_count_defaults(void);

typedef struct pdcm_counts pdcm_counts;

typedef struct pdcm_count_summary {
    uint64_t windows;
    uint64_t records;
    uint64_t accepted_records;
    uint64_t duplicate_clicks;
    uint64_t rejected_records;
    uint64_t total_clicks;
    uint64_t window_ps;
    uint64_t period_ps;
} pdcm_count_summary;

/* A null map_path selects channels 0-3 a_h, 4-7 a_v, 8-11 b_h, 12-15 b_v.
 * A path of "-" reads standard input. */
PDCM_API pdcm_status pdcm_count_file(const char *path, pdcm_timetag_format format, const char *map_path,
                                     const pdcm_count_options *options, pdcm_counts **out);
PDCM_API void pdcm_counts_destroy(pdcm_counts *counts);
PDCM_API pdcm_status pdcm_counts_get_summary(const pdcm_counts *counts, pdcm_count_summary *out);
/* Windows with the given 16-bit channel mask. */
PDCM_API uint64_t pdcm_counts_mask(const pdcm_counts *counts, uint16_t mask);
/* Windows reducing to the given click pattern (each entry 0-4). */
PDCM_API uint64_t pdcm_counts_pattern(const pdcm_counts *counts, pdcm_pattern pattern);

typedef struct pdcm_generator_options {
    uint64_t pulses;
    uint64_t period_ps;
    double jitter_ps;
    uint64_t seed;
} pdcm_generator_options;

PDCM_API pdcm_generator_options pdcm_generator_defaults(void);

/* Writes a synthetic stream to `path` ("-" for standard output) and reports
 * the record count through `records` (nullable). */
PDCM_API pdcm_status pdcm_generate_file(const pdcm_model *model, double phi, double theta,
                                        const pdcm_generator_options *options, const char *map_path,
                                        pdcm_timetag_format format, const char *path, uint64_t *records);

#ifdef __cplusplus
}
#endif

#endif /* PDCMETRO_H_ */

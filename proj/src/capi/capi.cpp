// Copyright 2026 The pdcmetro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pdcmetro/pdcmetro.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <new>
#include <numbers>
#include <string>

#include "pdcmetro/calibration.hpp"
#include "pdcmetro/error.hpp"
#include "pdcmetro/estimation.hpp"
#include "pdcmetro/heralding.hpp"
#include "pdcmetro/timetag.hpp"

struct pdcm_model {
    pdcm::ProbabilityModel model;
};

struct pdcm_counts {
    pdcm::CoincidenceCounts counts;
    std::uint64_t records = 0;
};

namespace {

thread_local std::string last_error;

struct ArgumentError {
    std::string what;
};

pdcm_status status_of(pdcm::Errc code) {
    switch (code) {
        case pdcm::Errc::domain:
            return PDCM_E_DOMAIN;
        case pdcm::Errc::unsupported_regime:
            return PDCM_E_UNSUPPORTED;
        case pdcm::Errc::fit:
            return PDCM_E_FIT;
        case pdcm::Errc::calibration:
            return PDCM_E_CALIBRATION;
        case pdcm::Errc::parse:
            return PDCM_E_PARSE;
        case pdcm::Errc::io:
            return PDCM_E_IO;
    }
    return PDCM_E_INTERNAL;
}

template <typename F>
pdcm_status guarded(F &&body) {
    last_error.clear();
    try {
        body();
        return PDCM_OK;
    } catch (const ArgumentError &e) {
        last_error = e.what;
        return PDCM_E_ARGUMENT;
    } catch (const pdcm::Error &e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc &) {
        last_error = "out of memory";
        return PDCM_E_INTERNAL;
    } catch (const std::exception &e) {
        last_error = e.what();
        return PDCM_E_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return PDCM_E_INTERNAL;
    }
}

void need(const void *p, const char *name) {
    if (!p) throw ArgumentError{std::string(name) + " must not be null"};
}

std::optional<int> arity_of(int arity) { return arity > 0 ? std::optional<int>(arity) : std::nullopt; }

pdcm::DetectionPattern pattern_of(pdcm_pattern p) { return {p.ah, p.av, p.bh, p.bv}; }

std::vector<pdcm::FringeSample> samples_of(const double *phis, const double *counts, size_t n_angles,
                                           size_t n_patterns) {
    need(phis, "phis");
    need(counts, "counts");
    std::vector<pdcm::FringeSample> out(n_angles);
    for (size_t i = 0; i < n_angles; ++i) {
        out[i].phi = phis[i];
        out[i].counts.assign(counts + i * n_patterns, counts + (i + 1) * n_patterns);
    }
    return out;
}

pdcm::TimetagFormat format_of(pdcm_timetag_format f) {
    if (f == PDCM_TIMETAG_CSV) return pdcm::TimetagFormat::csv;
    if (f == PDCM_TIMETAG_BINARY) return pdcm::TimetagFormat::binary;
    throw ArgumentError{"unknown timetag format"};
}

pdcm::ChannelMap load_map(const char *map_path) {
    if (!map_path) return pdcm::ChannelMap();
    std::ifstream in(map_path);
    if (!in) throw pdcm::Error(pdcm::Errc::io, std::string("cannot open channel map ") + map_path);
    return pdcm::ChannelMap::parse(in);
}

}  // namespace

extern "C" {

const char *pdcm_version(void) { return "0.1.0"; }

const char *pdcm_last_error(void) { return last_error.c_str(); }

const char *pdcm_status_name(pdcm_status status) {
    switch (status) {
        case PDCM_OK:
            return "ok";
        case PDCM_E_DOMAIN:
            return "domain error";
        case PDCM_E_UNSUPPORTED:
            return "unsupported regime";
        case PDCM_E_FIT:
            return "fit error";
        case PDCM_E_CALIBRATION:
            return "calibration error";
        case PDCM_E_PARSE:
            return "parse error";
        case PDCM_E_IO:
            return "i/o error";
        case PDCM_E_ARGUMENT:
            return "invalid argument";
        case PDCM_E_INTERNAL:
            return "internal error";
    }
    return "unknown status";
}

pdcm_status pdcm_model_create(double tau, double eta_a, double eta_b, int arity, double trunc_epsilon,
                              pdcm_model **out) {
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        if (!(tau >= 0.0)) throw pdcm::Error(pdcm::Errc::domain, "tau must be non-negative");
        if (!(trunc_epsilon > 0.0 && trunc_epsilon < 1.0)) {
            throw pdcm::Error(pdcm::Errc::domain, "truncation epsilon must lie in (0, 1)");
        }
        pdcm::ProbabilityModel model(pdcm::SourceParams{tau, trunc_epsilon},
                                     pdcm::DetectorModel{arity_of(arity), eta_a, eta_b});
        *out = new pdcm_model{std::move(model)};
    });
}

void pdcm_model_destroy(pdcm_model *model) { delete model; }

pdcm_status pdcm_model_get_info(const pdcm_model *model, pdcm_model_info *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        out->nmax = model->model.nmax();
        out->max_clicks_a = model->model.max_clicks_a();
        out->max_clicks_b = model->model.max_clicks_b();
        out->arity = model->model.detector().arity.value_or(0);
    });
}

pdcm_status pdcm_probability(const pdcm_model *model, pdcm_pattern pattern, double phi, double theta, double *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = model->model.probability(pattern_of(pattern), {phi, theta});
    });
}

pdcm_status pdcm_total_probability(const pdcm_model *model, double phi, double theta, double *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = model->model.distribution({phi, theta}).total();
    });
}

const char *pdcm_fourfold_label(int index) {
    static const char *const labels[PDCM_FOURFOLD_PATTERNS] = {"2002", "2011", "2020", "1102", "1111",
                                                                "1120", "0202", "0211", "0220"};
    return index >= 0 && index < PDCM_FOURFOLD_PATTERNS ? labels[index] : nullptr;
}

pdcm_status pdcm_fourfold(const pdcm_model *model, double phi, double theta, double *probabilities,
                          double *derivatives) {
    return guarded([&] {
        need(model, "model");
        need(probabilities, "probabilities");
        const auto d = model->model.conditional({phi, theta}, {}, derivatives != nullptr);
        for (int i = 0; i < PDCM_FOURFOLD_PATTERNS; ++i) {
            probabilities[i] = d.probabilities[static_cast<size_t>(i)];
            if (derivatives) derivatives[i] = d.derivatives[static_cast<size_t>(i)];
        }
    });
}

pdcm_status pdcm_mean_photon_numbers(const pdcm_model *model, pdcm_mean_photons *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const auto m = model->model.mean_photons();
        *out = {m.path_a, m.path_b, m.conditional_a, m.conditional_a_detected};
    });
}

pdcm_status pdcm_fisher(const pdcm_model *model, double phi, double theta, double *information, int *floored) {
    return guarded([&] {
        need(model, "model");
        need(information, "information");
        const auto v = pdcm::fisher_information(pdcm::conditional_family(model->model, theta), phi);
        *information = v.information;
        if (floored) *floored = v.floored;
    });
}

pdcm_status pdcm_snl(const pdcm_model *model, double *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = pdcm::snl_fisher(model->model.source(), model->model.detector());
    });
}

pdcm_status pdcm_heisenberg(double tau, double trunc_epsilon, double *out) {
    return guarded([&] {
        need(out, "out");
        *out = pdcm::heisenberg_limit(pdcm::SourceParams{tau, trunc_epsilon});
    });
}

pdcm_status pdcm_max_advantage(const pdcm_model *model, double theta, pdcm_advantage *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const auto family = pdcm::conditional_family(model->model, theta);
        const auto peak = pdcm::max_fisher(family, 0.0, 2.0 * std::numbers::pi, 720);
        out->fisher_max = peak.information;
        out->phi = std::fmod(peak.phi + 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
        out->snl = pdcm::snl_fisher(model->model.source(), model->model.detector());
        out->advantage = peak.information / out->snl - 1.0;
    });
}

pdcm_status pdcm_fit_fringes(const double *phis, const double *counts, size_t n_angles, size_t n_patterns,
                             pdcm_fringe_curve *curves) {
    return guarded([&] {
        need(curves, "curves");
        const auto fit = pdcm::fit_fringes(samples_of(phis, counts, n_angles, n_patterns));
        for (size_t i = 0; i < n_patterns; ++i) {
            const auto &c = fit.curves()[i];
            curves[i] = {c.c0, c.c1, c.c2, c.phase, c.residual_norm, c.phase_stderr};
        }
    });
}

pdcm_band_options pdcm_band_defaults(void) {
    const pdcm::BandOptions d;
    return {d.iterations, d.lower_quantile, d.upper_quantile, d.poisson_noise ? 1 : 0, 0};
}

pdcm_status pdcm_fisher_band(const double *phis, const double *counts, size_t n_angles, size_t n_patterns,
                             const double *grid, size_t n_grid, const pdcm_band_options *options, double *central,
                             double *low, double *high) {
    return guarded([&] {
        need(grid, "grid");
        need(central, "central");
        need(low, "low");
        need(high, "high");
        const pdcm_band_options o = options ? *options : pdcm_band_defaults();
        const pdcm::BandOptions bo{o.iterations, o.lower_quantile, o.upper_quantile, o.poisson_noise != 0};
        const auto band = pdcm::bootstrap_fisher_band(samples_of(phis, counts, n_angles, n_patterns),
                                                      std::span<const double>(grid, n_grid), bo, o.seed);
        for (size_t i = 0; i < n_grid; ++i) {
            central[i] = band.central[i];
            low[i] = band.low[i];
            high[i] = band.high[i];
        }
    });
}

pdcm_status pdcm_ml_fisher(const pdcm_model *model, double theta, double phi, int repetitions, int samples,
                           double lo, double hi, uint64_t seed, pdcm_ml_result *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const auto r = pdcm::monte_carlo_ml_fisher(repetitions, samples, phi,
                                                   pdcm::conditional_probabilities(model->model, theta), {lo, hi},
                                                   seed);
        *out = {r.information, r.standard_error, r.mean, r.variance, r.ambiguous};
    });
}

pdcm_status pdcm_performance_curve(double tau, double trunc_epsilon, int arity, const double *etas, size_t n,
                                   pdcm_performance_point *out) {
    return guarded([&] {
        need(etas, "etas");
        need(out, "out");
        const auto points = pdcm::performance_curve(pdcm::SourceParams{tau, trunc_epsilon},
                                                     std::span<const double>(etas, n), arity_of(arity));
        for (size_t i = 0; i < n; ++i) {
            const auto &p = points[i];
            out[i] = {p.eta, p.fisher, p.phi_best, p.normalized_uncertainty, p.heisenberg};
        }
    });
}

pdcm_status pdcm_simulate_rates(const pdcm_model *model, pdcm_rates *out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const auto r = pdcm::simulate_rates(model->model);
        *out = {r.singles_a, r.singles_b, r.twofold};
    });
}

pdcm_status pdcm_read_rates(const char *path, pdcm_rates *out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        pdcm::RateSummary r;
        if (std::string(path) == "-") {
            r = pdcm::parse_rate_summary(std::cin);
        } else {
            std::ifstream in(path);
            if (!in) throw pdcm::Error(pdcm::Errc::io, std::string("cannot open rates file ") + path);
            r = pdcm::parse_rate_summary(in);
        }
        *out = {r.singles_a, r.singles_b, r.twofold};
    });
}

pdcm_status pdcm_calibrate(const pdcm_rates *rates, int residual_arity, pdcm_calibration *out) {
    return guarded([&] {
        need(rates, "rates");
        need(out, "out");
        std::optional<std::optional<int>> check;
        if (residual_arity >= 0) check = arity_of(residual_arity);
        const auto c = pdcm::calibrate({rates->singles_a, rates->singles_b, rates->twofold}, check);
        out->tau = c.tau;
        out->eta_a = c.eta_a;
        out->eta_b = c.eta_b;
        out->pair_probability = c.pair_probability;
        out->boundary = c.boundary ? 1 : 0;
        out->has_residuals = c.residuals ? 1 : 0;
        out->residuals = c.residuals ? pdcm_rates{c.residuals->singles_a, c.residuals->singles_b,
                                                  c.residuals->twofold}
                                     : pdcm_rates{0.0, 0.0, 0.0};
    });
}

pdcm_status pdcm_tau_from_pair_probability(double p, double *tau, int *boundary) {
    return guarded([&] {
        need(tau, "tau");
        bool b = false;
        *tau = pdcm::tau_from_pair_probability(p, &b);
        if (boundary) *boundary = b ? 1 : 0;
    });
}

static pdcm_herald_cell cell_of(const pdcm::HeraldCell &c) {
    return {c.value, c.phi, c.fisher, c.mean_photons, c.acceptance};
}

pdcm_status pdcm_herald(int k, double eta, double tau, double trunc_epsilon, double phi, pdcm_herald_cell *out) {
    return guarded([&] {
        need(out, "out");
        const std::optional<double> at = std::isnan(phi) ? std::nullopt : std::optional<double>(phi);
        *out = cell_of(pdcm::conditional_fisher_per_photon({k, eta, tau, trunc_epsilon}, at));
    });
}

pdcm_status pdcm_herald_table(double tau, const double *etas, size_t n_eta, const int *ks, size_t n_k,
                              double trunc_epsilon, pdcm_herald_cell *cells) {
    return guarded([&] {
        need(etas, "etas");
        need(ks, "ks");
        need(cells, "cells");
        const auto table = pdcm::herald_table(tau, std::vector<double>(etas, etas + n_eta),
                                              std::vector<int>(ks, ks + n_k), trunc_epsilon);
        for (size_t i = 0; i < n_k; ++i) {
            for (size_t j = 0; j < n_eta; ++j) cells[i * n_eta + j] = cell_of(table.cells[i][j]);
        }
    });
}

pdcm_count_options pdcm_count_defaults(void) {
    const pdcm::CountOptions d;
    return {d.window_ps, d.period_ps.value_or(0), -1, 0, 256};
}

pdcm_status pdcm_count_file(const char *path, pdcm_timetag_format format, const char *map_path,
                            const pdcm_count_options *options, pdcm_counts **out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        const pdcm_count_options o = options ? *options : pdcm_count_defaults();
        pdcm::CountOptions co;
        co.window_ps = o.window_ps;
        if (o.period_ps > 0) co.period_ps = o.period_ps;
        else co.period_ps.reset();
        if (o.offset_ps >= 0) co.offset_ps = static_cast<std::uint64_t>(o.offset_ps);
        if (o.pulses > 0) co.pulses = o.pulses;
        const pdcm::ChannelMap map = load_map(map_path);
        const auto fmt = format_of(format);

        auto result = std::make_unique<pdcm_counts>();
        auto run = [&](std::istream &in) {
            pdcm::TimetagReader reader(in, fmt, o.reorder_capacity);
            result->counts = pdcm::count_coincidences(reader, map, co);
            result->records = reader.records_read();
        };
        if (std::string(path) == "-") {
            run(std::cin);
        } else {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw pdcm::Error(pdcm::Errc::io, std::string("cannot open timetag file ") + path);
            run(in);
        }
        *out = result.release();
    });
}

void pdcm_counts_destroy(pdcm_counts *counts) { delete counts; }

pdcm_status pdcm_counts_get_summary(const pdcm_counts *counts, pdcm_count_summary *out) {
    return guarded([&] {
        need(counts, "counts");
        need(out, "out");
        const auto &c = counts->counts;
        *out = {c.windows,          counts->records,  c.accepted_records,        c.duplicate_clicks,
                c.rejected_records, c.total_clicks(), c.window_ps, c.period_ps.value_or(0)};
    });
}

uint64_t pdcm_counts_mask(const pdcm_counts *counts, uint16_t mask) {
    return counts ? counts->counts.patterns[mask] : 0;
}

uint64_t pdcm_counts_pattern(const pdcm_counts *counts, pdcm_pattern pattern) {
    if (!counts) return 0;
    for (int v : {pattern.ah, pattern.av, pattern.bh, pattern.bv}) {
        if (v < 0 || v > 4) return 0;
    }
    return counts->counts.count(pattern_of(pattern));
}

pdcm_generator_options pdcm_generator_defaults(void) {
    const pdcm::GeneratorOptions d;
    return {d.pulses, d.period_ps, d.jitter_ps, d.seed};
}

pdcm_status pdcm_generate_file(const pdcm_model *model, double phi, double theta,
                               const pdcm_generator_options *options, const char *map_path,
                               pdcm_timetag_format format, const char *path, uint64_t *records) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        const pdcm_generator_options o = options ? *options : pdcm_generator_defaults();
        const auto fmt = format_of(format);
        const auto stream = pdcm::generate_synthetic_timetags(
            model->model, {phi, theta}, pdcm::GeneratorOptions{o.pulses, o.period_ps, o.jitter_ps, o.seed},
            load_map(map_path));
        if (std::string(path) == "-") {
            pdcm::write_timetags(std::cout, stream, fmt);
            std::cout.flush();
        } else {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw pdcm::Error(pdcm::Errc::io, std::string("cannot open output file ") + path);
            pdcm::write_timetags(out, stream, fmt);
            if (!out) throw pdcm::Error(pdcm::Errc::io, std::string("write failed on ") + path);
        }
        if (records) *records = stream.size();
    });
}

}  // extern "C"

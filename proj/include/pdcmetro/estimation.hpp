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

// Phase estimation on top of pattern-probability families phi -> p_i(phi):
// Fisher information, cosine-series fringe fits, maximum-likelihood phase
// estimates and the Monte-Carlo procedures built from them.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdcmetro/engine.hpp"

namespace pdcm {

/// Probabilities of a family at one phase, with their phase derivatives.
struct FamilyPoint {
    std::vector<double> p;
    std::vector<double> dp;
};

using Family = std::function<FamilyPoint(double phi)>;
using ProbabilityFn = std::function<std::vector<double>(double phi)>;

/// Conditional (class-renormalized) family of a model at fixed theta, with
/// analytic derivatives.
Family conditional_family(const ProbabilityModel &model, double theta = 0.0, ConditioningClass cls = {});

/// Unconditioned family over every detection pattern.
Family full_family(const ProbabilityModel &model, double theta = 0.0);

/// Conditional family without derivatives; cheaper for likelihood work.
ProbabilityFn conditional_probabilities(const ProbabilityModel &model, double theta = 0.0, ConditioningClass cls = {});

/// Drops the derivatives of a family.
ProbabilityFn probabilities_of(Family family);

/// Probabilities below this are floored when their derivative is non-zero.
inline constexpr double kProbabilityFloor = 1e-12;

struct FisherValue {
    double information = 0.0;
    /// Entries with p_i below the floor but a non-zero derivative.
    int floored = 0;
    bool divergent() const { return floored > 0; }
};

/// I = sum_i dp_i^2 / p_i. Entries with p_i below kProbabilityFloor are
/// skipped when dp_i == 0 and floored (and counted) otherwise.
FisherValue fisher_information(std::span<const double> p, std::span<const double> dp);

/// Fisher information of a family. Exact zeros of a smooth family are
/// removable singularities; when any p_i falls below the floor the value is
/// taken as the mean over phi +/- 1e-4.
FisherValue fisher_information(const Family &family, double phi);

struct FisherPeak {
    double phi = 0.0;
    double information = 0.0;
};

/// Grid of `samples` midpoints over [lo, hi) then golden-section refinement
/// of the best cell.
FisherPeak max_fisher(const Family &family, double lo, double hi, int samples);

/// Central finite difference (f(phi + h) - f(phi - h)) / 2h, per entry.
std::vector<double> central_difference(const ProbabilityFn &f, double phi, double h = 1e-4);

// --- fringe fitting -------------------------------------------------------

/// C0 + C1 cos(phi + phase) + C2 cos(2 (phi + phase)), phase in [-pi/2, pi/2).
struct FringeCurve {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double phase = 0.0;
    double residual_norm = 0.0;
    /// Standard error of `phase` from the fit Jacobian; infinite when the
    /// residual degrees of freedom are exhausted.
    double phase_stderr = 0.0;

    double value(double phi) const;
    double derivative(double phi) const;
};

/// Per-angle counts for each pattern of a family.
struct FringeSample {
    double phi = 0.0;
    std::vector<double> counts;
};

/// Fitted curves, jointly renormalized so that sum_i p_i(phi) = 1.
class FringeFit {
   public:
    explicit FringeFit(std::vector<FringeCurve> curves) : curves_(std::move(curves)) {}

    const std::vector<FringeCurve> &curves() const { return curves_; }
    std::size_t size() const { return curves_.size(); }

    /// Normalized p_i(phi) with analytic derivatives from the cosine series.
    FamilyPoint evaluate(double phi) const;
    Family family() const;

   private:
    std::vector<FringeCurve> curves_;
};

/// Least-squares fit of each pattern's relative frequency (counts over total
/// counts at that angle). Needs at least 5 distinct angles.
FringeFit fit_fringes(std::span<const FringeSample> samples);

/// Fits one series of values against phase.
FringeCurve fit_fringe_curve(std::span<const double> phis, std::span<const double> values);

// --- maximum likelihood ---------------------------------------------------

struct SearchInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct MlEstimate {
    double phi = 0.0;
    double log_likelihood = 0.0;
    /// Every maximizer found; more than one only when `ambiguous`.
    std::vector<double> maximizers;
    bool ambiguous = false;
};

/// Multinomial log-likelihood maximizer over a fixed interval: a coarse grid
/// (model tabulated once) followed by golden-section refinement.
class MlEstimator {
   public:
    MlEstimator(ProbabilityFn model, SearchInterval interval, int grid_points = 1000);

    MlEstimate operator()(std::span<const std::uint64_t> counts) const;

    const SearchInterval &interval() const { return interval_; }

   private:
    double log_likelihood(std::span<const std::uint64_t> counts, const std::vector<double> &p) const;
    double refine(std::span<const std::uint64_t> counts, double lo, double hi) const;

    ProbabilityFn model_;
    SearchInterval interval_;
    std::vector<double> grid_;
    std::vector<std::vector<double>> table_;
};

MlEstimate ml_estimate(std::span<const std::uint64_t> counts, const ProbabilityFn &model, SearchInterval search);

/// Seeded multinomial sample of `n` draws.
std::vector<std::uint64_t> sample_multinomial(std::span<const double> p, std::uint64_t n, std::uint64_t seed);

struct MlFisher {
    double information = 0.0;  // 1 / (N var)
    double standard_error = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    int repetitions = 0;
    int samples = 0;
    int ambiguous = 0;
    std::uint64_t seed = 0;
};

/// Variance of M maximum-likelihood estimates, each from N samples drawn at
/// `phi`. Repetition k draws from a generator seeded by mix(seed, k), so the
/// result does not depend on scheduling.
MlFisher monte_carlo_ml_fisher(int repetitions, int samples, double phi, const ProbabilityFn &model,
                               SearchInterval search, std::uint64_t seed);

// --- bootstrap ------------------------------------------------------------

struct FisherBand {
    std::vector<double> phi;
    std::vector<double> central;
    std::vector<double> low;
    std::vector<double> high;
    int iterations = 0;
    std::uint64_t seed = 0;
};

struct BandOptions {
    int iterations = 1000;
    double lower_quantile = 0.025;
    double upper_quantile = 0.975;
    /// When false the resampled counts equal the observed counts.
    bool poisson_noise = true;
};

/// Poisson-resamples the counts, refits the fringes and recomputes I(phi),
/// returning pointwise quantiles around the fit of the observed data.
FisherBand bootstrap_fisher_band(std::span<const FringeSample> samples, std::span<const double> phi_grid,
                                 const BandOptions &options, std::uint64_t seed);

// --- baselines ------------------------------------------------------------

/// Shot-noise Fisher information of a 2+2 event: the mean number of
/// sensing-path photons reaching the detectors per accepted event, at one
/// unit of information per photon. Requires tau < 0.15.
double snl_fisher(const SourceParams &src, const DetectorModel &det);

/// <N_a^2> of the truncated state before loss.
double sensing_second_moment(const SourceParams &src);

/// 1 / sqrt(<N_a^2>); +infinity at zero gain.
double heisenberg_limit(const SourceParams &src);

struct PerformancePoint {
    double eta = 0.0;
    double fisher = 0.0;  // best over phi, all patterns
    double phi_best = 0.0;
    /// Delta phi sqrt(eta N_a); the shot-noise limit is 1.
    double normalized_uncertainty = 0.0;
    /// Heisenberg limit on the same normalized scale.
    double heisenberg = 0.0;
};

/// Loss-balanced (eta_a = eta_b = eta) normalized uncertainty curve.
std::vector<PerformancePoint> performance_curve(const SourceParams &src, std::span<const double> etas,
                                                std::optional<int> arity, int phi_samples = 64);

/// Splits mix(seed, stream) into an independent generator seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pdcm

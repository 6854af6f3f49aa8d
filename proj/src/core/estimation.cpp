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

#include "pdcmetro/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "optimize.hpp"
#include "parallel.hpp"
#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

constexpr double kPi = std::numbers::pi;
// Maps a phase offset into [-pi/2, pi/2); the C1 term changes sign for every
// shift by pi.
double canonical_phase(double phase, double &c1) {
    double shifted = std::remainder(phase, 2.0 * kPi);  // [-pi, pi]
    if (shifted >= 0.5 * kPi) {
        shifted -= kPi;
        c1 = -c1;
    } else if (shifted < -0.5 * kPi) {
        shifted += kPi;
        c1 = -c1;
    }
    return shifted;
}

struct LinearFit {
    Eigen::Vector3d coef;
    double rss = std::numeric_limits<double>::infinity();
    int rank = 0;
};

LinearFit fit_at_phase(std::span<const double> phis, std::span<const double> values, double phase) {
    const auto m = static_cast<Eigen::Index>(phis.size());
    Eigen::MatrixXd x(m, 3);
    Eigen::VectorXd y(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double u = phis[static_cast<std::size_t>(k)] + phase;
        x(k, 0) = 1.0;
        x(k, 1) = std::cos(u);
        x(k, 2) = std::cos(2.0 * u);
        y(k) = values[static_cast<std::size_t>(k)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    LinearFit out;
    out.rank = static_cast<int>(qr.rank());
    out.coef = qr.solve(y);
    out.rss = (x * out.coef - y).squaredNorm();
    return out;
}

int distinct_angles(std::span<const double> phis) {
    std::vector<double> reduced;
    for (double phi : phis) {
        double r = std::fmod(phi, 2.0 * kPi);
        if (r < 0) r += 2.0 * kPi;
        reduced.push_back(r);
    }
    std::sort(reduced.begin(), reduced.end());
    int count = 0;
    for (std::size_t k = 0; k < reduced.size(); ++k) {
        if (k == 0 || reduced[k] - reduced[k - 1] > 1e-9) ++count;
    }
    if (count > 1 && reduced.front() + 2.0 * kPi - reduced.back() <= 1e-9) --count;
    return count;
}

double quantile(std::vector<double> &values, double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double vlo = values[lo];
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(hi), values.end());
    const double vhi = values[hi];
    return vlo + (pos - static_cast<double>(lo)) * (vhi - vlo);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined state
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Family conditional_family(const ProbabilityModel &model, double theta, ConditioningClass cls) {
    return [model, theta, cls](double phi) {
        PatternDistribution d = model.conditional({phi, theta}, cls, true);
        return FamilyPoint{std::move(d.probabilities), std::move(d.derivatives)};
    };
}

Family full_family(const ProbabilityModel &model, double theta) {
    return [model, theta](double phi) {
        PatternDistribution d = model.distribution({phi, theta}, true);
        return FamilyPoint{std::move(d.probabilities), std::move(d.derivatives)};
    };
}

ProbabilityFn conditional_probabilities(const ProbabilityModel &model, double theta, ConditioningClass cls) {
    return [model, theta, cls](double phi) { return model.conditional({phi, theta}, cls, false).probabilities; };
}

ProbabilityFn probabilities_of(Family family) {
    return [family = std::move(family)](double phi) { return family(phi).p; };
}

FisherValue fisher_information(std::span<const double> p, std::span<const double> dp) {
    if (p.size() != dp.size()) throw Error(Errc::domain, "probability and derivative lengths differ");
    FisherValue out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pi = p[i];
        if (pi < kProbabilityFloor) {
            if (dp[i] == 0.0) continue;
            pi = kProbabilityFloor;
            ++out.floored;
        }
        out.information += dp[i] * dp[i] / pi;
    }
    return out;
}

FisherValue fisher_information(const Family &family, double phi) {
    const FamilyPoint at = family(phi);
    const FisherValue direct = fisher_information(at.p, at.dp);
    // An exact zero hides a 0/0 limit; dp^2 / p tends to 2 p'' there, taken
    // from the derivatives beside phi. A floored entry with a visible share is
    // evaluated beside phi instead. Far-tail entries with p and dp both tiny
    // stay clipped at the floor.
    enum class Use { direct, limit, beside };
    std::vector<Use> use(at.p.size(), Use::direct);
    bool step = false;
    for (std::size_t i = 0; i < at.p.size(); ++i) {
        if (at.p[i] >= kProbabilityFloor) continue;
        if (at.p[i] < 1e-24) {
            use[i] = Use::limit;
        } else if (at.dp[i] * at.dp[i] / at.p[i] > 1e-10 * direct.information) {
            use[i] = Use::beside;
        } else {
            continue;
        }
        step = true;
    }
    if (!step) return direct;
    constexpr double h = 1e-4;
    const FamilyPoint lo = family(phi - h);
    const FamilyPoint hi = family(phi + h);
    auto term = [](double p, double dp, int &floored) {
        if (p >= kProbabilityFloor) return dp * dp / p;
        if (dp == 0.0) return 0.0;
        ++floored;
        return dp * dp / kProbabilityFloor;
    };
    FisherValue out;
    for (std::size_t i = 0; i < at.p.size(); ++i) {
        switch (use[i]) {
            case Use::limit:
                out.information += std::max(0.0, (hi.dp[i] - lo.dp[i]) / h);
                break;
            case Use::beside: {
                int a = 0;
                int b = 0;
                out.information += 0.5 * (term(lo.p[i], lo.dp[i], a) + term(hi.p[i], hi.dp[i], b));
                out.floored += std::max(a, b);
                break;
            }
            case Use::direct:
                out.information += term(at.p[i], at.dp[i], out.floored);
                break;
        }
    }
    return out;
}

FisherPeak max_fisher(const Family &family, double lo, double hi, int samples) {
    if (samples < 2 || !(hi > lo)) throw Error(Errc::domain, "max_fisher needs hi > lo and at least 2 samples");
    const double step = (hi - lo) / samples;
    auto info = [&](double phi) { return fisher_information(family, phi).information; };
    FisherPeak best{lo + 0.5 * step, -1.0};
    for (int k = 0; k < samples; ++k) {
        const double phi = lo + (k + 0.5) * step;
        const double v = info(phi);
        if (v > best.information) best = {phi, v};
    }
    const double refined = detail::golden_maximize(info, best.phi - step, best.phi + step, 1e-9);
    const double v = info(refined);
    if (v > best.information) best = {refined, v};
    return best;
}

std::vector<double> central_difference(const ProbabilityFn &f, double phi, double h) {
    const auto hi = f(phi + h);
    const auto lo = f(phi - h);
    std::vector<double> out(hi.size());
    for (std::size_t i = 0; i < hi.size(); ++i) out[i] = (hi[i] - lo[i]) / (2.0 * h);
    return out;
}

// --- fringe fitting -------------------------------------------------------

double FringeCurve::value(double phi) const {
    const double u = phi + phase;
    return c0 + c1 * std::cos(u) + c2 * std::cos(2.0 * u);
}

double FringeCurve::derivative(double phi) const {
    const double u = phi + phase;
    return -c1 * std::sin(u) - 2.0 * c2 * std::sin(2.0 * u);
}

FamilyPoint FringeFit::evaluate(double phi) const {
    FamilyPoint out;
    double total = 0.0;
    double dtotal = 0.0;
    for (const auto &c : curves_) {
        out.p.push_back(c.value(phi));
        out.dp.push_back(c.derivative(phi));
        total += out.p.back();
        dtotal += out.dp.back();
    }
    for (std::size_t i = 0; i < out.p.size(); ++i) {
        const double f = out.p[i];
        out.p[i] = f / total;
        out.dp[i] = (out.dp[i] - f * dtotal / total) / total;
    }
    return out;
}

Family FringeFit::family() const {
    return [fit = *this](double phi) { return fit.evaluate(phi); };
}

FringeCurve fit_fringe_curve(std::span<const double> phis, std::span<const double> values) {
    if (phis.size() != values.size()) throw Error(Errc::fit, "phase and value series differ in length");
    if (distinct_angles(phis) < 5) throw Error(Errc::fit, "fringe fit needs at least 5 distinct phase angles");

    // Profile the residual over the shared phase, then refine the best
    // coarse bracket.
    constexpr int kCoarse = 180;
    const double step = kPi / kCoarse;
    double best_phase = -0.5 * kPi;
    double best_rss = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kCoarse; ++k) {
        const double phase = -0.5 * kPi + k * step;
        const LinearFit fit = fit_at_phase(phis, values, phase);
        if (fit.rank < 3) throw Error(Errc::fit, "fringe design matrix is rank deficient");
        if (fit.rss < best_rss) {
            best_rss = fit.rss;
            best_phase = phase;
        }
    }
    const double phase = detail::golden_maximize(
        [&](double u) { return -fit_at_phase(phis, values, u).rss; }, best_phase - step, best_phase + step, 1e-12);
    const LinearFit fit = fit_at_phase(phis, values, phase);

    FringeCurve out;
    out.c0 = fit.coef(0);
    out.c1 = fit.coef(1);
    out.c2 = fit.coef(2);
    out.phase = canonical_phase(phase, out.c1);
    out.residual_norm = std::sqrt(fit.rss);

    // Gauss-Newton covariance of (C0, C1, C2, phase).
    const auto m = static_cast<Eigen::Index>(phis.size());
    Eigen::MatrixXd jac(m, 4);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double u = phis[static_cast<std::size_t>(k)] + out.phase;
        jac(k, 0) = 1.0;
        jac(k, 1) = std::cos(u);
        jac(k, 2) = std::cos(2.0 * u);
        jac(k, 3) = -out.c1 * std::sin(u) - 2.0 * out.c2 * std::sin(2.0 * u);
    }
    const Eigen::Index dof = m - 4;
    const Eigen::Matrix4d info = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
    if (dof > 0 && lu.isInvertible()) {
        const double sigma2 = fit.rss / static_cast<double>(dof);
        out.phase_stderr = std::sqrt(std::max(0.0, sigma2 * lu.inverse()(3, 3)));
    } else {
        out.phase_stderr = std::numeric_limits<double>::infinity();
    }
    return out;
}

FringeFit fit_fringes(std::span<const FringeSample> samples) {
    if (samples.empty()) throw Error(Errc::fit, "no fringe samples");
    const std::size_t patterns = samples.front().counts.size();
    if (patterns == 0) throw Error(Errc::fit, "fringe samples carry no patterns");
    std::vector<double> phis;
    std::vector<std::vector<double>> freq(patterns);
    for (const auto &s : samples) {
        if (s.counts.size() != patterns) throw Error(Errc::fit, "fringe samples differ in pattern count");
        double total = 0.0;
        for (double c : s.counts) {
            if (!(c >= 0.0)) throw Error(Errc::fit, "fringe counts must be non-negative");
            total += c;
        }
        if (!(total > 0.0)) throw Error(Errc::fit, "fringe sample at phi=" + std::to_string(s.phi) + " has no counts");
        phis.push_back(s.phi);
        for (std::size_t i = 0; i < patterns; ++i) freq[i].push_back(s.counts[i] / total);
    }
    std::vector<FringeCurve> curves;
    for (std::size_t i = 0; i < patterns; ++i) curves.push_back(fit_fringe_curve(phis, freq[i]));
    return FringeFit(std::move(curves));
}

// --- maximum likelihood ---------------------------------------------------

MlEstimator::MlEstimator(ProbabilityFn model, SearchInterval interval, int grid_points)
    : model_(std::move(model)), interval_(interval) {
    if (!(interval.hi > interval.lo)) throw Error(Errc::domain, "search interval must have hi > lo");
    if (grid_points < 3) throw Error(Errc::domain, "likelihood grid needs at least 3 points");
    for (int k = 0; k < grid_points; ++k) {
        const double phi = interval.lo + (interval.hi - interval.lo) * k / (grid_points - 1);
        grid_.push_back(phi);
        table_.push_back(model_(phi));
    }
}

double MlEstimator::log_likelihood(std::span<const std::uint64_t> counts, const std::vector<double> &p) const {
    if (counts.size() != p.size()) throw Error(Errc::domain, "count vector does not match the model's patterns");
    double ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        if (!(p[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        ll += static_cast<double>(counts[i]) * std::log(p[i]);
    }
    return ll;
}

double MlEstimator::refine(std::span<const std::uint64_t> counts, double lo, double hi) const {
    return detail::golden_maximize([&](double phi) { return log_likelihood(counts, model_(phi)); }, lo, hi, 1e-8);
}

MlEstimate MlEstimator::operator()(std::span<const std::uint64_t> counts) const {
    const std::size_t g = grid_.size();
    std::vector<double> ll(g);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g; ++k) {
        ll[k] = log_likelihood(counts, table_[k]);
        best = std::max(best, ll[k]);
    }
    if (!std::isfinite(best)) throw Error(Errc::domain, "likelihood vanishes across the search interval");
    const double tol = 1e-9 * std::max(1.0, std::fabs(best));

    std::vector<std::pair<double, double>> found;  // (phi, ll)
    for (std::size_t k = 0; k < g; ++k) {
        if (ll[k] < best - tol) continue;
        if ((k > 0 && ll[k - 1] > ll[k]) || (k + 1 < g && ll[k + 1] > ll[k])) continue;
        const double lo = grid_[k > 0 ? k - 1 : 0];
        const double hi = grid_[k + 1 < g ? k + 1 : g - 1];
        const double phi = refine(counts, lo, hi);
        found.emplace_back(phi, log_likelihood(counts, model_(phi)));
    }
    double top = -std::numeric_limits<double>::infinity();
    for (const auto &f : found) top = std::max(top, f.second);

    MlEstimate out;
    const double spacing = 2.0 * (grid_[1] - grid_[0]);
    for (const auto &[phi, value] : found) {
        if (value < top - tol) continue;
        if (!out.maximizers.empty() && phi - out.maximizers.back() <= spacing) continue;
        out.maximizers.push_back(phi);
    }
    out.phi = out.maximizers.front();
    out.log_likelihood = top;
    out.ambiguous = out.maximizers.size() > 1;
    return out;
}

MlEstimate ml_estimate(std::span<const std::uint64_t> counts, const ProbabilityFn &model, SearchInterval search) {
    return MlEstimator(model, search)(counts);
}

std::vector<std::uint64_t> sample_multinomial(std::span<const double> p, std::uint64_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> out(p.size(), 0);
    double remaining_mass = 1.0;
    std::uint64_t remaining = n;
    for (std::size_t i = 0; i + 1 < p.size() && remaining > 0; ++i) {
        const double q = remaining_mass > 0.0 ? std::clamp(p[i] / remaining_mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> draw(remaining, q);
        out[i] = draw(rng);
        remaining -= out[i];
        remaining_mass -= p[i];
    }
    if (!p.empty()) out.back() += remaining;
    return out;
}

MlFisher monte_carlo_ml_fisher(int repetitions, int samples, double phi, const ProbabilityFn &model,
                               SearchInterval search, std::uint64_t seed) {
    if (repetitions < 2) throw Error(Errc::domain, "monte_carlo_ml_fisher needs at least 2 repetitions");
    if (samples < 1) throw Error(Errc::domain, "monte_carlo_ml_fisher needs at least 1 sample per estimate");
    const MlEstimator estimator(model, search);
    const std::vector<double> p = model(phi);

    std::vector<double> estimates(static_cast<std::size_t>(repetitions));
    std::vector<char> ambiguous(static_cast<std::size_t>(repetitions), 0);
    detail::parallel_for(estimates.size(), [&](std::size_t k) {
        const auto counts = sample_multinomial(p, static_cast<std::uint64_t>(samples), derive_seed(seed, k));
        const MlEstimate est = estimator(counts);
        estimates[k] = est.phi;
        ambiguous[k] = est.ambiguous ? 1 : 0;
    });

    MlFisher out;
    out.repetitions = repetitions;
    out.samples = samples;
    out.seed = seed;
    const double m = static_cast<double>(repetitions);
    for (double e : estimates) out.mean += e;
    out.mean /= m;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double e : estimates) {
        const double d = e - out.mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    out.variance = m2 / (m - 1.0);
    for (char a : ambiguous) out.ambiguous += a;
    if (out.variance > 0.0) {
        out.information = 1.0 / (samples * out.variance);
        // Standard error of the sample variance from the fourth central moment,
        // carried to I = 1 / (N var) by the delta method.
        const double mu4 = m4 / m;
        const double var_of_var = std::max(0.0, (mu4 - out.variance * out.variance * (m - 3.0) / (m - 1.0)) / m);
        out.standard_error = out.information * std::sqrt(var_of_var) / out.variance;
    } else {
        out.information = std::numeric_limits<double>::infinity();
    }
    return out;
}

// --- bootstrap ------------------------------------------------------------

FisherBand bootstrap_fisher_band(std::span<const FringeSample> samples, std::span<const double> phi_grid,
                                 const BandOptions &options, std::uint64_t seed) {
    if (options.iterations < 100) throw Error(Errc::domain, "bootstrap needs at least 100 iterations");
    if (!(options.lower_quantile >= 0.0 && options.lower_quantile < options.upper_quantile &&
          options.upper_quantile <= 1.0)) {
        throw Error(Errc::domain, "band quantiles must satisfy 0 <= lower < upper <= 1");
    }
    FisherBand out;
    out.iterations = options.iterations;
    out.seed = seed;
    out.phi.assign(phi_grid.begin(), phi_grid.end());

    const FringeFit central = fit_fringes(samples);
    const Family central_family = central.family();
    for (double phi : phi_grid) out.central.push_back(fisher_information(central_family, phi).information);

    const std::size_t iters = static_cast<std::size_t>(options.iterations);
    std::vector<std::vector<double>> curves(iters);
    detail::parallel_for(iters, [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        std::vector<FringeSample> resampled(samples.begin(), samples.end());
        if (options.poisson_noise) {
            for (auto &s : resampled) {
                for (double &c : s.counts) {
                    if (c > 0.0) c = static_cast<double>(std::poisson_distribution<std::uint64_t>(c)(rng));
                }
            }
        }
        const Family family = fit_fringes(resampled).family();
        curves[b].reserve(phi_grid.size());
        for (double phi : phi_grid) curves[b].push_back(fisher_information(family, phi).information);
    });

    std::vector<double> column(iters);
    for (std::size_t j = 0; j < phi_grid.size(); ++j) {
        for (std::size_t b = 0; b < iters; ++b) column[b] = curves[b][j];
        const double lo = quantile(column, options.lower_quantile);
        const double hi = quantile(column, options.upper_quantile);
        // Keep the central curve inside the band.
        out.low.push_back(std::min(lo, out.central[j]));
        out.high.push_back(std::max(hi, out.central[j]));
    }
    return out;
}

// --- baselines ------------------------------------------------------------

double snl_fisher(const SourceParams &src, const DetectorModel &det) {
    if (!(src.tau < 0.15)) throw Error(Errc::domain, "snl_fisher is validated for tau < 0.15");
    // Only n = 2 survives the 2+2 conditioning at vanishing gain.
    if (src.tau == 0.0) return 2.0;
    // The conditional mean needs the tail small against the two-pair mass,
    // which an absolute cut drops at tiny gain.
    const double x = std::pow(std::tanh(src.tau), 2);
    SourceParams rel = src;
    rel.trunc_epsilon = std::clamp(src.trunc_epsilon * 3.0 * x * x * (1 - x) * (1 - x), 1e-300, src.trunc_epsilon);
    return ProbabilityModel(rel, det).mean_photons().conditional_a_detected;
}

double sensing_second_moment(const SourceParams &src) {
    const int nmax = choose_truncation(src);
    const double x = std::pow(std::tanh(src.tau), 2);
    double out = 0.0;
    for (int n = 0; n <= nmax; ++n) out += static_cast<double>(n) * n * (n + 1) * std::pow(x, n) * (1 - x) * (1 - x);
    return out;
}

double heisenberg_limit(const SourceParams &src) {
    const double m2 = sensing_second_moment(src);
    if (!(m2 > 0.0)) return std::numeric_limits<double>::infinity();
    return 1.0 / std::sqrt(m2);
}

std::vector<PerformancePoint> performance_curve(const SourceParams &src, std::span<const double> etas,
                                                std::optional<int> arity, int phi_samples) {
    if (phi_samples < 4) throw Error(Errc::domain, "performance_curve needs at least 4 phase samples");
    const int nmax = choose_truncation(src);
    const double x = std::pow(std::tanh(src.tau), 2);
    double mean_a = 0.0;
    for (int n = 0; n <= nmax; ++n) mean_a += n * (n + 1) * std::pow(x, n) * (1 - x) * (1 - x);
    const double second = sensing_second_moment(src);

    std::vector<PerformancePoint> out;
    for (double eta : etas) {
        const ProbabilityModel model(src, DetectorModel{arity, eta, eta});
        const Family family = full_family(model);
        // I(phi) is even in phi, so half a period covers it.
        const FisherPeak peak = max_fisher(family, 0.0, kPi, phi_samples);
        PerformancePoint point;
        point.eta = eta;
        point.phi_best = peak.phi;
        point.fisher = peak.information;
        const double intensity = eta * mean_a;
        point.normalized_uncertainty = point.fisher > 0.0 ? std::sqrt(intensity / point.fisher)
                                                          : std::numeric_limits<double>::infinity();
        point.heisenberg = second > 0.0 ? std::sqrt(intensity / second) : 0.0;
        out.push_back(point);
    }
    return out;
}

}  // namespace pdcm

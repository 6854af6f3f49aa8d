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

#include "pdcmetro/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

constexpr double kMaxPairProbability = 8.0 / 27.0;

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string &field, int line) {
    double v = 0.0;
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw Error(Errc::parse, "line " + std::to_string(line) + ": '" + field + "' is not a number");
    }
    return v;
}

std::string describe(const RateSummary &r) {
    std::ostringstream os;
    os << "singles_a=" << r.singles_a << " singles_b=" << r.singles_b << " twofold=" << r.twofold;
    return os.str();
}

}  // namespace

double pair_probability(double tau) {
    if (!(tau >= 0.0)) throw Error(Errc::domain, "tau must be non-negative");
    const double t = std::pow(std::tanh(tau), 2);
    return 2.0 * t * (1.0 - t) * (1.0 - t);
}

EfficiencySolution efficiencies_from_rates(const RateSummary &rates) {
    for (double v : {rates.singles_a, rates.singles_b, rates.twofold}) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::calibration, "rates must lie in [0, 1]: " + describe(rates));
    }
    if (!(rates.twofold > 0.0)) {
        throw Error(Errc::calibration, "two-fold rate must be positive to fix the efficiencies: " + describe(rates));
    }
    const double ta = rates.singles_a + rates.twofold;  // p eta_a
    const double tb = rates.singles_b + rates.twofold;  // p eta_b
    EfficiencySolution out;
    out.eta_b = rates.twofold / ta;
    out.eta_a = rates.twofold / tb;
    out.pair_probability = ta * tb / rates.twofold;
    if (!(out.pair_probability <= 1.0)) {
        throw Error(Errc::calibration, "rates imply a pair probability above 1: " + describe(rates));
    }
    return out;
}

double tau_from_pair_probability(double p, bool *boundary) {
    if (!(p >= 0.0)) throw Error(Errc::calibration, "pair probability must be non-negative");
    const double slack = 64.0 * std::numeric_limits<double>::epsilon();
    if (p > kMaxPairProbability * (1.0 + slack)) {
        throw Error(Errc::calibration, "no solution: pair probability " + std::to_string(p) +
                                           " exceeds the maximum 8/27 of 2t(1-t)^2");
    }
    const bool at_max = p >= kMaxPairProbability * (1.0 - slack);
    if (boundary) *boundary = at_max;
    if (at_max) return std::atanh(std::sqrt(1.0 / 3.0));
    if (p == 0.0) return 0.0;

    // t^3 - 2t^2 + t - p/2 = 0; the trigonometric root with k = 2 is the
    // smallest, lying in [0, 1/3].
    const double arg = std::clamp(-1.0 + 6.75 * p, -1.0, 1.0);
    double t = 2.0 / 3.0 + 2.0 / 3.0 * std::cos(std::acos(arg) / 3.0 - 4.0 * std::numbers::pi / 3.0);
    t = std::clamp(t, 0.0, 1.0 / 3.0);
    // Newton polish: the closed form cancels badly for small p.
    for (int k = 0; k < 4; ++k) {
        const double f = 2.0 * t * (1.0 - t) * (1.0 - t) - p;
        const double df = 2.0 * (1.0 - t) * (1.0 - 3.0 * t);
        if (!(df > 0.0)) break;
        const double next = t - f / df;
        if (!(next >= 0.0 && next <= 1.0 / 3.0)) break;
        t = next;
    }
    return std::atanh(std::sqrt(t));
}

CalibrationResult calibrate(const RateSummary &rates, std::optional<std::optional<int>> arity) {
    const EfficiencySolution eff = efficiencies_from_rates(rates);
    CalibrationResult out;
    out.eta_a = eff.eta_a;
    out.eta_b = eff.eta_b;
    out.pair_probability = eff.pair_probability;
    out.tau = tau_from_pair_probability(eff.pair_probability, &out.boundary);
    if (arity) {
        const ProbabilityModel model(SourceParams{out.tau}, DetectorModel{*arity, out.eta_a, out.eta_b});
        const RateSummary back = simulate_rates(model);
        auto rel = [](double model_value, double input) {
            return input != 0.0 ? (model_value - input) / input : model_value;
        };
        out.residuals = RateSummary{rel(back.singles_a, rates.singles_a), rel(back.singles_b, rates.singles_b),
                                    rel(back.twofold, rates.twofold)};
    }
    return out;
}

RateSummary simulate_rates(const ProbabilityModel &model, int phi_samples) {
    if (phi_samples < 1) throw Error(Errc::domain, "simulate_rates needs at least one phase sample");
    const std::vector<DetectionPattern> patterns = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
                                                    {1, 0, 1, 0}, {1, 0, 0, 1}, {0, 1, 1, 0}, {0, 1, 0, 1}};
    RateSummary out;
    for (int k = 0; k < phi_samples; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / phi_samples;
        const auto p = model.subset(patterns, {phi, 0.0}).probabilities;
        out.singles_a += p[0] + p[1];
        out.singles_b += p[2] + p[3];
        out.twofold += p[4] + p[5] + p[6] + p[7];
    }
    out.singles_a /= phi_samples;
    out.singles_b /= phi_samples;
    out.twofold /= phi_samples;
    return out;
}

RateSummary parse_rate_summary(std::istream &in) {
    std::string line;
    int line_no = 0;
    bool header = false;
    int rows = 0;
    RateSummary sum;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split_csv(t);
        if (!header) {
            if (fields != std::vector<std::string>{"phi", "singles_a", "singles_b", "twofold"}) {
                throw Error(Errc::parse, "line " + std::to_string(line_no) +
                                             ": expected header 'phi,singles_a,singles_b,twofold'");
            }
            header = true;
            continue;
        }
        if (fields.size() != 4) {
            throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                         std::to_string(fields.size()));
        }
        parse_number(fields[0], line_no);
        sum.singles_a += parse_number(fields[1], line_no);
        sum.singles_b += parse_number(fields[2], line_no);
        sum.twofold += parse_number(fields[3], line_no);
        ++rows;
    }
    if (!header) throw Error(Errc::parse, "rates file has no header");
    if (rows == 0) throw Error(Errc::parse, "rates file has no data rows");
    sum.singles_a /= rows;
    sum.singles_b /= rows;
    sum.twofold /= rows;
    return sum;
}

}  // namespace pdcm

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

// Source and efficiency calibration from per-pulse singles and two-fold rates.
//
// To first order in the pair probability p:
//   lone clicks in a  S_a = p eta_a (1 - eta_b)
//   lone clicks in b  S_b = p eta_b (1 - eta_a)
//   cross two-folds   T   = p eta_a eta_b
// and p = 2 t (1 - t)^2 with t = tanh^2 tau.

#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "pdcmetro/engine.hpp"

namespace pdcm {

/// Per-pulse probabilities, averaged over phi.
struct RateSummary {
    /// P(1000) + P(0100)
    double singles_a = 0.0;
    /// P(0010) + P(0001)
    double singles_b = 0.0;
    /// P(1010) + P(1001) + P(0110) + P(0101)
    double twofold = 0.0;
};

struct CalibrationResult {
    double tau = 0.0;
    double eta_a = 0.0;
    double eta_b = 0.0;
    double pair_probability = 0.0;
    /// p sits at the 8/27 maximum, where the branch choice is degenerate.
    bool boundary = false;
    /// Relative differences (model - input) / input of the full model at the
    /// recovered parameters; present when a detector arity was supplied.
    std::optional<RateSummary> residuals;
};

/// 2 tanh^2 tau / cosh^4 tau.
double pair_probability(double tau);

struct EfficiencySolution {
    double eta_a = 0.0;
    double eta_b = 0.0;
    double pair_probability = 0.0;
};

/// Inverts the three first-order relations.
EfficiencySolution efficiencies_from_rates(const RateSummary &rates);

/// Smallest root in [0, 1/3] of 2 t (1 - t)^2 = p, returned as artanh(sqrt t).
/// Sets *boundary when p is within rounding of 8/27.
double tau_from_pair_probability(double p, bool *boundary = nullptr);

/// Full calibration; with `arity` set (nullopt inside means perfect counting)
/// the recovered parameters are pushed back through the probability model and
/// the relative rate residuals are reported.
CalibrationResult calibrate(const RateSummary &rates, std::optional<std::optional<int>> arity = std::nullopt);

/// Rates the probability model predicts, averaged over `phi_samples` angles.
RateSummary simulate_rates(const ProbabilityModel &model, int phi_samples = 8);

/// Reads "phi,singles_a,singles_b,twofold" rows (header required, '#'
/// comments and blank lines skipped) and averages them.
RateSummary parse_rate_summary(std::istream &in);

}  // namespace pdcm

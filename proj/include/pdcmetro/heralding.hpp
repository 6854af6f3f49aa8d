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

// Sensing-path Fisher information per photon given a herald of K photons on
// the reference path, for number-resolving detectors with uniform efficiency.
//
// A herald of K accepts every event with at least K reference clicks. The
// reference marginal does not depend on phi, so the Fisher information of the
// accepted joint patterns equals that of the renormalized conditional
// distribution; it is divided by the conditional mean number of photons
// entering the sensing path.

#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "pdcmetro/engine.hpp"

namespace pdcm {

struct HeraldSpec {
    int k = 0;
    double eta = 1.0;
    double tau = 0.0;
    double trunc_epsilon = 1e-14;
};

struct HeraldCell {
    /// Fisher information per photon.
    double value = 0.0;
    double phi = 0.0;
    double fisher = 0.0;
    /// Conditional mean sensing-path photon number before loss.
    double mean_photons = 0.0;
    /// Probability that a pulse passes the herald.
    double acceptance = 0.0;
};

/// With `phi` unset the value is maximized over a half period.
HeraldCell conditional_fisher_per_photon(const HeraldSpec &spec, std::optional<double> phi = std::nullopt);

struct HeraldTable {
    double tau = 0.0;
    std::vector<double> etas;
    std::vector<int> ks;
    /// cells[i][j] for ks[i], etas[j].
    std::vector<std::vector<HeraldCell>> cells;
};

HeraldTable herald_table(double tau, const std::vector<double> &etas, const std::vector<int> &ks,
                         double trunc_epsilon = 1e-14);

/// Rows K, columns eta: "K,<eta_1>,<eta_2>,..." then one row per K.
void write_csv(std::ostream &out, const HeraldTable &table);

/// Sensing-path click pairs (r_ah, r_av) with P(r_a, reference clicks == k),
/// or the sensing-path marginal when `reference_clicks` is unset.
std::vector<std::pair<DetectionPattern, double>> sensing_distribution(const HeraldSpec &spec, double phi,
                                                                      std::optional<int> reference_clicks);

}  // namespace pdcm

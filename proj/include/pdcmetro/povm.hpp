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

// Photon-number-diagonal POVMs for one optical mode: a mode split evenly over
// d binary ("click / no click") detectors, or an ideal number-resolving
// counter, each optionally preceded by a loss channel of efficiency eta.

#pragma once

#include <Eigen/Dense>
#include <optional>

namespace pdcm {

using uint128 = unsigned __int128;

/// Stirling number of the second kind, exact for c <= 32.
uint128 stirling2(int c, int r);

/// d! S(c, r) / ((d - r)! d^c): probability that c photons spread uniformly
/// over d detectors fire exactly r of them.
double lossless_weights(int d, int r, int c);

/// Kronecker delta weight of an ideal photon-number-resolving counter.
double perfect_counting_weights(int r, int c);

/// Weight table w_r(c) for r in [0, max_clicks] and c in [0, max_photons].
class PovmTable {
   public:
    /// Lossless table of a d-fold multiplexed detector.
    static PovmTable multiplexed(int d, int max_photons);
    /// Lossless table of a perfect counter; clicks range over [0, max_photons].
    static PovmTable perfect(int max_photons);

    int max_clicks() const { return static_cast<int>(weights_.rows()) - 1; }
    int max_photons() const { return static_cast<int>(weights_.cols()) - 1; }
    /// Multiplexing arity, or nullopt for a perfect counter.
    std::optional<int> arity() const { return arity_; }
    /// Accumulated efficiency of all loss channels folded into the table.
    double efficiency() const { return efficiency_; }

    double operator()(int r, int c) const { return weights_(r, c); }
    const Eigen::MatrixXd &weights() const { return weights_; }

    /// Largest |sum_r w_r(c) - 1| over the table's photon range.
    double completeness_error() const;

   private:
    friend PovmTable lossy_weights(const PovmTable &table, double eta);
    PovmTable(std::optional<int> arity, Eigen::MatrixXd weights, double efficiency)
        : arity_(arity), weights_(std::move(weights)), efficiency_(efficiency) {}

    std::optional<int> arity_;
    Eigen::MatrixXd weights_;
    double efficiency_ = 1.0;
};

/// Folds a loss channel into the table:
/// w'_r(c') = sum_c w_r(c) C(c', c) eta^c (1 - eta)^(c' - c).
PovmTable lossy_weights(const PovmTable &table, double eta);

/// Lossy weights with each term scaled by the number of photons that survive
/// the channel: sum_c c w_r(c) C(c', c) eta^c (1 - eta)^(c' - c). Summing
/// against a photon-number distribution gives E[surviving photons; r clicks].
Eigen::MatrixXd surviving_photon_weights(const PovmTable &lossless, double eta);

/// Per-mode detectors of both paths. Efficiencies are shared by the h and v
/// modes of a path so that loss commutes with the polarization rotations.
struct DetectorModel {
    std::optional<int> arity = 4;  // nullopt: perfect counting
    double eta_a = 1.0;
    double eta_b = 1.0;

    PovmTable table_a(int max_photons) const;
    PovmTable table_b(int max_photons) const;
    /// Lossless table shared by both paths.
    PovmTable base_table(int max_photons) const;
    /// Largest click count one mode can report for photon cutoff `max_photons`.
    int max_clicks(int max_photons) const { return arity ? *arity : max_photons; }
};

}  // namespace pdcm

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

#include "pdcmetro/povm.hpp"

#include <array>
#include <cmath>
#include <string>

#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

constexpr int kMaxExactStirling = 32;

using StirlingTable = std::array<std::array<uint128, kMaxExactStirling + 1>, kMaxExactStirling + 1>;

const StirlingTable &stirling_table() {
    static const StirlingTable table = [] {
        StirlingTable t{};
        t[0][0] = 1;
        for (int c = 1; c <= kMaxExactStirling; ++c) {
            for (int r = 1; r <= c; ++r) {
                t[c][r] = static_cast<uint128>(r) * t[c - 1][r] + t[c - 1][r - 1];
            }
        }
        return t;
    }();
    return table;
}

void check_efficiency(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw Error(Errc::domain, "efficiency must lie in [0, 1], got " + std::to_string(eta));
    }
}

// Occupancy recurrence: adding one photon either lands on an already firing
// detector (r/d) or on a fresh one ((d - r + 1)/d).
Eigen::MatrixXd occupancy_table(int d, int max_photons) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d + 1, max_photons + 1);
    w(0, 0) = 1.0;
    for (int c = 1; c <= max_photons; ++c) {
        for (int r = 1; r <= d; ++r) {
            w(r, c) = w(r, c - 1) * r / d + w(r - 1, c - 1) * (d - r + 1) / d;
        }
    }
    return w;
}

// B(c, c') = C(c', c) eta^c (1 - eta)^(c' - c): c of c' photons survive.
Eigen::MatrixXd survival_matrix(int cmax, double eta) {
    Eigen::MatrixXd survive = Eigen::MatrixXd::Zero(cmax + 1, cmax + 1);
    for (int cp = 0; cp <= cmax; ++cp) {
        double binom = 1.0;
        for (int c = 0; c <= cp; ++c) {
            survive(c, cp) = binom * std::pow(eta, c) * std::pow(1.0 - eta, cp - c);
            binom = binom * (cp - c) / (c + 1);
        }
    }
    return survive;
}

}  // namespace

uint128 stirling2(int c, int r) {
    if (c < 0 || r < 0) throw Error(Errc::domain, "stirling2 requires non-negative arguments");
    if (c > kMaxExactStirling) {
        throw Error(Errc::domain, "stirling2 is exact only for c <= " + std::to_string(kMaxExactStirling));
    }
    if (r > c) return 0;
    return stirling_table()[c][r];
}

double lossless_weights(int d, int r, int c) {
    if (d < 1) throw Error(Errc::domain, "multiplexing arity must be >= 1");
    if (r < 0 || r > d) throw Error(Errc::domain, "click count must lie in [0, d]");
    if (c < 0) throw Error(Errc::domain, "photon number must be non-negative");
    if (r > c) return 0.0;
    if (c > kMaxExactStirling) return occupancy_table(d, c)(r, c);
    long double falling = 1.0L;
    for (int k = 0; k < r; ++k) falling *= static_cast<long double>(d - k);
    const long double s = static_cast<long double>(stirling2(c, r));
    return static_cast<double>(falling * s / std::pow(static_cast<long double>(d), c));
}

double perfect_counting_weights(int r, int c) {
    if (r < 0 || c < 0) throw Error(Errc::domain, "perfect_counting_weights requires r, c >= 0");
    return r == c ? 1.0 : 0.0;
}

PovmTable PovmTable::multiplexed(int d, int max_photons) {
    if (d < 1) throw Error(Errc::domain, "multiplexing arity must be >= 1");
    if (max_photons < 0) throw Error(Errc::domain, "photon cutoff must be non-negative");
    return PovmTable(d, occupancy_table(d, max_photons), 1.0);
}

PovmTable PovmTable::perfect(int max_photons) {
    if (max_photons < 0) throw Error(Errc::domain, "photon cutoff must be non-negative");
    return PovmTable(std::nullopt, Eigen::MatrixXd::Identity(max_photons + 1, max_photons + 1), 1.0);
}

double PovmTable::completeness_error() const {
    return (weights_.colwise().sum().array() - 1.0).abs().maxCoeff();
}

PovmTable lossy_weights(const PovmTable &table, double eta) {
    check_efficiency(eta);
    return PovmTable(table.arity_, table.weights_ * survival_matrix(table.max_photons(), eta),
                     table.efficiency_ * eta);
}

Eigen::MatrixXd surviving_photon_weights(const PovmTable &lossless, double eta) {
    check_efficiency(eta);
    Eigen::MatrixXd survive = survival_matrix(lossless.max_photons(), eta);
    for (Eigen::Index c = 0; c < survive.rows(); ++c) survive.row(c) *= static_cast<double>(c);
    return lossless.weights() * survive;
}

PovmTable DetectorModel::base_table(int max_photons) const {
    return arity ? PovmTable::multiplexed(*arity, max_photons) : PovmTable::perfect(max_photons);
}

PovmTable DetectorModel::table_a(int max_photons) const { return lossy_weights(base_table(max_photons), eta_a); }

PovmTable DetectorModel::table_b(int max_photons) const { return lossy_weights(base_table(max_photons), eta_b); }

}  // namespace pdcm

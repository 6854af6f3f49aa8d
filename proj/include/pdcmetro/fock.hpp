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

// Photon-number amplitudes of the type-II down-conversion state
//
//   |PDC> = sum_n tanh(tau)^n / cosh(tau)^2 sum_m (-1)^m |n-m, m, m, n-m>
//
// over modes (a_h, a_v, b_h, b_v), and of the two-mode polarization rotation
//
//   U(angle) = [[cos(angle/2),  sin(angle/2)],
//               [sin(angle/2), -cos(angle/2)]]
//
// acting on the creation operators of one path. The sensing rotation phi acts
// on (a_h, a_v); the reference control rotation theta acts on (b_h, b_v).

#pragma once

#include <Eigen/Dense>
#include <utility>

namespace pdcm {

/// Photon numbers in modes (a_h, a_v, b_h, b_v).
struct ModeOccupation {
    int ah = 0;
    int av = 0;
    int bh = 0;
    int bv = 0;

    int path_a() const { return ah + av; }
    int path_b() const { return bh + bv; }
    bool valid() const { return ah >= 0 && av >= 0 && bh >= 0 && bv >= 0; }
};

struct SourceParams {
    double tau = 0.0;
    /// Probability mass allowed to fall outside the truncated pair sum.
    double trunc_epsilon = 1e-12;
};

struct RotationSpec {
    double phi = 0.0;    // sensing path
    double theta = 0.0;  // reference path control
};

/// Normalized amplitude (-1)^m tanh^n(tau) / cosh^2(tau) of |n-m, m, m, n-m>.
double pdc_term_amplitude(int n, int m, const SourceParams &src);

/// Probability mass of all pair numbers above `nmax`:
/// sum_{n > nmax} (n+1) tanh^{2n} / cosh^4.
double truncation_tail(double tau, int nmax);

/// Smallest pair cutoff whose neglected tail is below `src.trunc_epsilon`.
/// Throws Errc::unsupported_regime for tau >= 1.
int choose_truncation(const SourceParams &src);

/// Matrix of <p', n-p'| U(angle) |p, n-p> indexed (p', p), computed by
/// expanding the transformed creation-operator monomials.
Eigen::MatrixXd rotation_block(int n, double angle);

/// Elementwise d/d(angle) of rotation_block.
Eigen::MatrixXd rotation_block_derivative(int n, double angle);

/// <p', q'| U(angle) |p, q>; zero unless p' + q' == p + q.
double rotation_amplitude(std::pair<int, int> out, std::pair<int, int> in, double angle);

/// Joint probabilities of the n-pair component after rotation, indexed
/// (c_ah, c_bh) with c_av = n - c_ah and c_bv = n - c_bh. `dprob` holds the
/// derivative with respect to phi when requested.
struct PairBlock {
    int n = 0;
    Eigen::MatrixXd prob;
    Eigen::MatrixXd dprob;
};

PairBlock pair_block(int n, const RotationSpec &rot, const SourceParams &src, bool with_derivative = false);

/// Probability of the perfect projection onto `c`; zero whenever the two
/// paths carry different photon numbers.
double ideal_pattern_probability(const ModeOccupation &c, const RotationSpec &rot, const SourceParams &src);

}  // namespace pdcm

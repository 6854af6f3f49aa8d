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

#include "pdcmetro/fock.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

void check_source(const SourceParams &src) {
    if (!(src.tau >= 0.0) || !std::isfinite(src.tau)) {
        throw Error(Errc::domain, "gain tau must be finite and non-negative, got " + std::to_string(src.tau));
    }
    if (!(src.trunc_epsilon > 0.0 && src.trunc_epsilon < 1.0)) {
        throw Error(Errc::domain, "trunc_epsilon must lie in (0, 1)");
    }
}

std::vector<double> binomial_row(int n) {
    std::vector<double> row(n + 1, 1.0);
    for (int k = 1; k < n; ++k) {
        row[k] = row[k - 1] * (n - k + 1) / k;
    }
    return row;
}

// Expands prod (c x + s y)^p (s x - c y)^(n-p) and returns, for each column p,
// the monomial coefficients as a list of (coef, power of c, power of s, p').
template <typename Visit>
void expand_block(int n, Visit &&visit) {
    for (int p = 0; p <= n; ++p) {
        const int q = n - p;
        const auto bp = binomial_row(p);
        const auto bq = binomial_row(q);
        for (int i = 0; i <= p; ++i) {
            for (int j = 0; j <= q; ++j) {
                const double sign = ((q - j) % 2 == 0) ? 1.0 : -1.0;
                // c^(i + q - j) s^(p - i + j) x^(i + j) y^(n - i - j)
                visit(p, i + j, sign * bp[i] * bq[j], i + q - j, p - i + j);
            }
        }
    }
}

// sqrt(p'! q'! / (p! q!)) for p' + q' == p + q == n.
double fock_norm(int n, int pp, int p) {
    return std::exp(0.5 * (std::lgamma(pp + 1.0) + std::lgamma(n - pp + 1.0) - std::lgamma(p + 1.0) -
                           std::lgamma(n - p + 1.0)));
}

std::vector<double> powers(double base, int n) {
    std::vector<double> out(n + 2, 1.0);
    for (int k = 1; k < n + 2; ++k) out[k] = out[k - 1] * base;
    return out;
}

}  // namespace

double pdc_term_amplitude(int n, int m, const SourceParams &src) {
    if (n < 0 || m < 0 || m > n) {
        throw Error(Errc::domain, "pdc_term_amplitude requires 0 <= m <= n");
    }
    check_source(src);
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const double ch = std::cosh(src.tau);
    return sign * std::pow(std::tanh(src.tau), n) / (ch * ch);
}

double truncation_tail(double tau, int nmax) {
    const double t = std::tanh(tau);
    const double x = t * t;
    if (x == 0.0) return nmax < 0 ? 1.0 : 0.0;
    return std::pow(x, nmax + 1) * ((nmax + 2) - (nmax + 1) * x);
}

int choose_truncation(const SourceParams &src) {
    check_source(src);
    if (src.tau >= 1.0) {
        throw Error(Errc::unsupported_regime, "gain tau >= 1 is outside the supported regime");
    }
    int nmax = 0;
    while (truncation_tail(src.tau, nmax) >= src.trunc_epsilon) ++nmax;
    return nmax;
}

Eigen::MatrixXd rotation_block(int n, double angle) {
    if (n < 0) throw Error(Errc::domain, "rotation_block requires n >= 0");
    const auto cp = powers(std::cos(angle / 2), n);
    const auto sp = powers(std::sin(angle / 2), n);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n + 1);
    expand_block(n, [&](int p, int pp, double coef, int pc, int ps) { out(pp, p) += coef * cp[pc] * sp[ps]; });
    for (int p = 0; p <= n; ++p) {
        for (int pp = 0; pp <= n; ++pp) out(pp, p) *= fock_norm(n, pp, p);
    }
    return out;
}

Eigen::MatrixXd rotation_block_derivative(int n, double angle) {
    if (n < 0) throw Error(Errc::domain, "rotation_block_derivative requires n >= 0");
    const auto cp = powers(std::cos(angle / 2), n);
    const auto sp = powers(std::sin(angle / 2), n);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n + 1);
    // d/da c^k s^l = (l/2) c^(k+1) s^(l-1) - (k/2) c^(k-1) s^(l+1)
    expand_block(n, [&](int p, int pp, double coef, int pc, int ps) {
        double d = 0.0;
        if (ps > 0) d += 0.5 * ps * cp[pc + 1] * sp[ps - 1];
        if (pc > 0) d -= 0.5 * pc * cp[pc - 1] * sp[ps + 1];
        out(pp, p) += coef * d;
    });
    for (int p = 0; p <= n; ++p) {
        for (int pp = 0; pp <= n; ++pp) out(pp, p) *= fock_norm(n, pp, p);
    }
    return out;
}

double rotation_amplitude(std::pair<int, int> out, std::pair<int, int> in, double angle) {
    if (out.first < 0 || out.second < 0 || in.first < 0 || in.second < 0) {
        throw Error(Errc::domain, "rotation_amplitude requires non-negative photon numbers");
    }
    const int n = in.first + in.second;
    if (out.first + out.second != n) return 0.0;
    return rotation_block(n, angle)(out.first, in.first);
}

PairBlock pair_block(int n, const RotationSpec &rot, const SourceParams &src, bool with_derivative) {
    check_source(src);
    if (n < 0) throw Error(Errc::domain, "pair_block requires n >= 0");
    // Source block: a = (n-m, m) is column n-m of the sensing rotation and
    // b = (m, n-m) is column m of the reference rotation.
    Eigen::MatrixXd source = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int m = 0; m <= n; ++m) source(n - m, m) = pdc_term_amplitude(n, m, src);

    const Eigen::MatrixXd rb = rotation_block(n, rot.theta);
    const Eigen::MatrixXd right = source * rb.transpose();
    const Eigen::MatrixXd amp = rotation_block(n, rot.phi) * right;

    PairBlock block;
    block.n = n;
    block.prob = amp.cwiseProduct(amp);
    if (with_derivative) {
        const Eigen::MatrixXd damp = rotation_block_derivative(n, rot.phi) * right;
        block.dprob = 2.0 * amp.cwiseProduct(damp);
    }
    return block;
}

double ideal_pattern_probability(const ModeOccupation &c, const RotationSpec &rot, const SourceParams &src) {
    if (!c.valid()) throw Error(Errc::domain, "occupation numbers must be non-negative");
    check_source(src);
    if (c.path_a() != c.path_b()) return 0.0;
    return pair_block(c.path_a(), rot, src).prob(c.ah, c.bh);
}

}  // namespace pdcm

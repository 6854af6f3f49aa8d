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

#include "support/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {
namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return factorial(n) / (factorial(k) * factorial(n - k));
}

double norm_factor(const Occupation &o) {
    return std::sqrt(factorial(o[0]) * factorial(o[1]) * factorial(o[2]) * factorial(o[3]));
}

// A polynomial in the four creation operators acting on vacuum. The
// coefficient of a monomial relates to the Fock amplitude through
// amplitude = coefficient * sqrt(prod k!).
using Poly = std::map<Occupation, double>;

Poly to_poly(const State &s) {
    Poly p;
    for (const auto &[occ, amp] : s) p[occ] = amp / norm_factor(occ);
    return p;
}

State to_state(const Poly &p) {
    State s;
    for (const auto &[occ, coef] : p) {
        double amp = coef * norm_factor(occ);
        if (amp != 0.0) s[occ] += amp;
    }
    return s;
}

// Recursive assignment enumeration: photon i goes to every detector.
void enumerate(int d, int c, int i, std::vector<int> &hits, int occupied, std::vector<std::uint64_t> &tally) {
    if (i == c) {
        tally[occupied] += 1;
        return;
    }
    for (int det = 0; det < d; ++det) {
        bool fresh = hits[det] == 0;
        hits[det] += 1;
        enumerate(d, c, i + 1, hits, occupied + (fresh ? 1 : 0), tally);
        hits[det] -= 1;
    }
}

// Probability that a mode holding n photons reports r clicks after loss eta.
double mode_weight(int d, int r, int n, double eta) {
    double total = 0.0;
    for (int k = 0; k <= n; ++k) {
        double survive = binomial(n, k) * std::pow(eta, k) * std::pow(1.0 - eta, n - k);
        total += survive * click_probability(d, r, k);
    }
    return total;
}

State rotated_state(double tau, int nmax, double phi, double theta) {
    State s = pdc_state(tau, nmax);
    s = rotate(s, 0, phi);
    return rotate(s, 2, theta);
}

}  // namespace

State pdc_state(double tau, int nmax) {
    State s;
    double ch = std::cosh(tau);
    double th = std::tanh(tau);
    for (int n = 0; n <= nmax; ++n) {
        double a = std::pow(th, n) / (ch * ch);
        for (int m = 0; m <= n; ++m) {
            double sign = (m % 2 == 0) ? 1.0 : -1.0;
            s[{n - m, m, m, n - m}] += sign * a;
        }
    }
    return s;
}

int truncation_by_summation(double tau, double eps) {
    if (tau == 0.0) return 0;
    double ch = std::cosh(tau);
    double x = std::tanh(tau) * std::tanh(tau);
    for (int nmax = 0; nmax < 10000; ++nmax) {
        double tail = 0.0;
        for (int n = nmax + 1; n < nmax + 4000; ++n) {
            double t = (n + 1) * std::pow(x, n) / std::pow(ch, 4);
            tail += t;
            if (t < 1e-300) break;
        }
        if (tail <= eps) return nmax;
    }
    throw std::runtime_error("no truncation");
}

State rotate(const State &in, int first, double angle) {
    double c = std::cos(angle / 2.0);
    double s = std::sin(angle / 2.0);
    Poly out;
    for (const auto &[occ, coef] : to_poly(in)) {
        int p = occ[first];
        int q = occ[first + 1];
        // (c x + s y)^p (s x - c y)^q expanded term by term
        for (int i = 0; i <= p; ++i) {
            double ti = binomial(p, i) * std::pow(c, i) * std::pow(s, p - i);  // x^i y^(p-i)
            for (int j = 0; j <= q; ++j) {
                double tj = binomial(q, j) * std::pow(s, j) * std::pow(-c, q - j);  // x^j y^(q-j)
                Occupation o = occ;
                o[first] = i + j;
                o[first + 1] = (p - i) + (q - j);
                out[o] += coef * ti * tj;
            }
        }
    }
    return to_state(out);
}

State lose(const State &in, const std::array<int, 4> &k, const std::array<double, 4> &eta) {
    State out;
    for (const auto &[occ, amp] : in) {
        Occupation o = occ;
        double a = amp;
        for (int m = 0; m < 4; ++m) {
            int n = occ[m];
            if (k[m] > n) {
                a = 0.0;
                break;
            }
            a *= std::sqrt(binomial(n, k[m]) * std::pow(1.0 - eta[m], k[m]) * std::pow(eta[m], n - k[m]));
            o[m] = n - k[m];
        }
        if (a != 0.0) out[o] += a;
    }
    return out;
}

std::uint64_t assignments_with_r_occupied(int d, int r, int c) {
    std::vector<std::uint64_t> tally(static_cast<std::size_t>(d) + 1, 0);
    std::vector<int> hits(static_cast<std::size_t>(d), 0);
    enumerate(d, c, 0, hits, 0, tally);
    return (r >= 0 && r <= d) ? tally[static_cast<std::size_t>(r)] : 0;
}

double click_probability(int d, int r, int c) {
    if (d == 0) return r == c ? 1.0 : 0.0;
    static std::map<std::array<int, 2>, std::vector<std::uint64_t>> cache;
    auto key = std::array<int, 2>{d, c};
    auto it = cache.find(key);
    if (it == cache.end()) {
        std::vector<std::uint64_t> tally(static_cast<std::size_t>(d) + 1, 0);
        std::vector<int> hits(static_cast<std::size_t>(d), 0);
        enumerate(d, c, 0, hits, 0, tally);
        it = cache.emplace(key, std::move(tally)).first;
    }
    if (r < 0 || r > d) return 0.0;
    return static_cast<double>(it->second[static_cast<std::size_t>(r)]) / std::pow(static_cast<double>(d), c);
}

double detection_probability(const std::array<int, 4> &r, double tau, double phi, double theta, double eta_a,
                             double eta_b, int d, int nmax) {
    State s = rotated_state(tau, nmax, phi, theta);
    const std::array<double, 4> eta{eta_a, eta_a, eta_b, eta_b};
    double total = 0.0;
    for (const auto &[occ, amp] : s) {
        double w = amp * amp;
        for (int m = 0; m < 4 && w != 0.0; ++m) w *= mode_weight(d, r[m], occ[m], eta[m]);
        total += w;
    }
    return total;
}

double detection_probability_loss_first(const std::array<int, 4> &r, double tau, double phi, double theta,
                                        double eta_a, double eta_b, int d, int nmax) {
    State s0 = pdc_state(tau, nmax);
    const std::array<double, 4> eta{eta_a, eta_a, eta_b, eta_b};
    double total = 0.0;
    // The source state has at most nmax photons per mode.
    for (int k0 = 0; k0 <= nmax; ++k0)
        for (int k1 = 0; k1 <= nmax; ++k1)
            for (int k2 = 0; k2 <= nmax; ++k2)
                for (int k3 = 0; k3 <= nmax; ++k3) {
                    State branch = lose(s0, {k0, k1, k2, k3}, eta);
                    if (branch.empty()) continue;
                    branch = rotate(rotate(branch, 0, phi), 2, theta);
                    for (const auto &[occ, amp] : branch) {
                        double w = amp * amp;
                        for (int m = 0; m < 4 && w != 0.0; ++m) w *= click_probability(d, r[m], occ[m]);
                        total += w;
                    }
                }
    return total;
}

double wigner_small_d(double j, double mp, double m, double beta) {
    double c = std::cos(beta / 2.0);
    double s = std::sin(beta / 2.0);
    int kmin = static_cast<int>(std::lround(std::max(0.0, m - mp)));
    int kmax = static_cast<int>(std::lround(std::min(j + m, j - mp)));
    double pre = std::sqrt(factorial(static_cast<int>(std::lround(j + mp))) *
                           factorial(static_cast<int>(std::lround(j - mp))) *
                           factorial(static_cast<int>(std::lround(j + m))) *
                           factorial(static_cast<int>(std::lround(j - m))));
    double sum = 0.0;
    for (int k = kmin; k <= kmax; ++k) {
        int a = static_cast<int>(std::lround(j + m)) - k;
        int b = k;
        int e = static_cast<int>(std::lround(mp - m)) + k;
        int f = static_cast<int>(std::lround(j - mp)) - k;
        double sign = ((static_cast<int>(std::lround(mp - m)) + k) % 2 == 0) ? 1.0 : -1.0;
        double num = std::pow(c, static_cast<int>(std::lround(2 * j + m - mp)) - 2 * k) *
                     std::pow(s, static_cast<int>(std::lround(mp - m)) + 2 * k);
        sum += sign * num / (factorial(a) * factorial(b) * factorial(e) * factorial(f));
    }
    return pre * sum;
}

std::uint64_t set_partitions(int c, int r) {
    if (c == 0) return r == 0 ? 1 : 0;
    // restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1])
    std::uint64_t count = 0;
    std::vector<int> a(static_cast<std::size_t>(c), 0);
    std::vector<int> mx(static_cast<std::size_t>(c), 0);
    while (true) {
        if (mx[static_cast<std::size_t>(c) - 1] + 1 == r) ++count;
        int i = c - 1;
        while (i > 0 && a[static_cast<std::size_t>(i)] == mx[static_cast<std::size_t>(i) - 1] + 1) --i;
        if (i == 0) break;
        a[static_cast<std::size_t>(i)] += 1;
        mx[static_cast<std::size_t>(i)] = std::max(mx[static_cast<std::size_t>(i) - 1], a[static_cast<std::size_t>(i)]);
        for (int k = i + 1; k < c; ++k) {
            a[static_cast<std::size_t>(k)] = 0;
            mx[static_cast<std::size_t>(k)] = mx[static_cast<std::size_t>(k) - 1];
        }
    }
    return count;
}

}  // namespace oracle

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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pdcmetro/fock.hpp"
#include "support/check.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace pdcm;
using std::numbers::pi;

namespace {

double sq(double x) { return x * x; }

}  // namespace

TEST_CASE("pdc_term_amplitude") {
    CHECK(pdc_term_amplitude(0, 0, {0.0}) == 1.0);
    const double t = 0.37;
    CHECK(pdc_term_amplitude(1, 1, {t}) == doctest::Approx(-std::tanh(t) / sq(std::cosh(t))).epsilon(1e-15));
    CHECK(pdc_term_amplitude(2, 1, {t}) < 0.0);
    CHECK(pdc_term_amplitude(2, 2, {t}) > 0.0);
    CHECK(check::error_of([] { pdc_term_amplitude(1, 2, {0.1}); }) == Errc::domain);
    CHECK(check::error_of([] { pdc_term_amplitude(-1, 0, {0.1}); }) == Errc::domain);
    CHECK(check::error_of([] { pdc_term_amplitude(0, -1, {0.1}); }) == Errc::domain);
}

TEST_CASE("truncated norm follows the geometric series") {
    // sum_n (n + 1) x^n = 1 / (1 - x)^2 and 1 / cosh^4 = (1 - x)^2 with x = tanh^2
    for (double tau : {0.01, 0.061, 0.1, 0.2, 0.5}) {
        SourceParams src{tau, 1e-12};
        const int nmax = choose_truncation(src);
        double kept = 0.0;
        for (int n = 0; n <= nmax; ++n)
            for (int m = 0; m <= n; ++m) kept += sq(pdc_term_amplitude(n, m, src));
        const double x = sq(std::tanh(tau));
        double partial = 0.0;
        for (int n = 0; n <= nmax; ++n) partial += (n + 1) * std::pow(x, n);
        const double closed_tail = 1.0 - partial * sq(1.0 - x);
        CHECK(kept == doctest::Approx(1.0 - closed_tail).epsilon(1e-13));
        CHECK(1.0 - kept < 1e-12 + 1e-14);
        CHECK(truncation_tail(tau, nmax) == doctest::Approx(closed_tail).epsilon(1e-6));
    }
}

TEST_CASE("choose_truncation") {
    CHECK(choose_truncation({0.0}) == 0);
    const int n061 = choose_truncation({0.061, 1e-12});
    CHECK(n061 >= 1);
    CHECK(n061 <= 9);
    CHECK(truncation_tail(0.061, n061) < 1e-12);
    CHECK(truncation_tail(0.061, n061 - 1) >= 1e-12);
    CHECK(check::error_of([] { choose_truncation({1.0}); }) == Errc::unsupported_regime);
    CHECK(check::error_of([] { choose_truncation({1.5}); }) == Errc::unsupported_regime);
    CHECK(check::error_of([] { choose_truncation({-0.1}); }) == Errc::domain);
}

TEST_CASE("tail formula against direct summation") {
    for (double eps : {1e-6, 1e-10, 1e-12, 1e-14}) {
        CAPTURE(eps);
        CHECK(choose_truncation({0.1, eps}) == oracle::truncation_by_summation(0.1, eps));
    }
    const double x = sq(std::tanh(0.1));
    for (int nmax = 0; nmax < 12; ++nmax) {
        double direct = 0.0;
        for (int n = nmax + 1; n < 400; ++n) direct += (n + 1) * std::pow(x, n) * sq(1.0 - x);
        CHECK(truncation_tail(0.1, nmax) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("rotation_amplitude examples") {
    for (int n = 0; n <= 5; ++n)
        for (int p = 0; p <= n; ++p)
            for (int pp = 0; pp <= n; ++pp) {
                const double a = rotation_amplitude({pp, n - pp}, {p, n - p}, 0.0);
                CHECK(std::abs(a) == doctest::Approx(p == pp ? 1.0 : 0.0));
            }
    for (double phi : {0.3, 1.0, 2.5, -4.0}) {
        CHECK(rotation_amplitude({1, 0}, {1, 0}, phi) == doctest::Approx(std::cos(phi / 2)).epsilon(1e-15));
    }
    CHECK(rotation_amplitude({2, 0}, {1, 0}, 0.7) == 0.0);
    CHECK(rotation_amplitude({0, 0}, {1, 1}, 0.7) == 0.0);
    CHECK(check::error_of([] { rotation_amplitude({-1, 0}, {0, 0}, 0.1); }) == Errc::domain);
}

TEST_CASE("property: rotation is unitary and conserves photons") {
    gen::for_all(60, 11, [](gen::Gen &g) {
        const int p = g.integer(0, 6);
        const int q = g.integer(0, 6);
        const double angle = g.wide_angle();
        double norm = 0.0;
        for (int pp = 0; pp <= p + q; ++pp) norm += sq(rotation_amplitude({pp, p + q - pp}, {p, q}, angle));
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        const int pp = g.integer(0, 8);
        const int qq = g.integer(0, 8);
        if (pp + qq != p + q) CHECK(rotation_amplitude({pp, qq}, {p, q}, angle) == 0.0);
        // columns of the block are orthonormal
        const Eigen::MatrixXd u = rotation_block(p + q, angle);
        CHECK((u.transpose() * u - Eigen::MatrixXd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() < 1e-12);
    });
}

TEST_CASE("property: squared amplitudes equal the closed-form Wigner-d elements") {
    gen::for_all(80, 12, [](gen::Gen &g) {
        const int n = g.integer(0, 8);
        const int p = g.integer(0, n);
        const int pp = g.integer(0, n);
        const double angle = g.wide_angle();
        const double j = n / 2.0;
        const double d = oracle::wigner_small_d(j, (pp - (n - pp)) / 2.0, (p - (n - p)) / 2.0, angle);
        CHECK(sq(rotation_amplitude({pp, n - pp}, {p, n - p}, angle)) == doctest::Approx(sq(d)).epsilon(1e-11));
    });
}

TEST_CASE("property: rotation matches creation-operator substitution") {
    gen::for_all(40, 13, [](gen::Gen &g) {
        const int p = g.integer(0, 5);
        const int q = g.integer(0, 5);
        const double angle = g.wide_angle();
        const oracle::State out = oracle::rotate({{{p, q, 0, 0}, 1.0}}, 0, angle);
        for (int pp = 0; pp <= p + q; ++pp) {
            auto it = out.find({pp, p + q - pp, 0, 0});
            const double want = it == out.end() ? 0.0 : it->second;
            CHECK(rotation_amplitude({pp, p + q - pp}, {p, q}, angle) == doctest::Approx(want).epsilon(1e-12));
        }
    });
}

TEST_CASE("rotation_block_derivative matches a central difference") {
    for (int n : {1, 2, 4}) {
        const double a = 0.9;
        const double h = 1e-5;
        const Eigen::MatrixXd fd = (rotation_block(n, a + h) - rotation_block(n, a - h)) / (2 * h);
        CHECK((rotation_block_derivative(n, a) - fd).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("ideal_pattern_probability examples") {
    CHECK(ideal_pattern_probability({0, 0, 0, 0}, {1.3, 0.2}, {0.0}) == doctest::Approx(1.0));
    CHECK(ideal_pattern_probability({1, 0, 0, 0}, {1.3, 0.2}, {0.2}) == 0.0);
    CHECK(ideal_pattern_probability({2, 1, 1, 1}, {0.4, 0.0}, {0.2}) == 0.0);
    const double t = 0.1;
    const double want = sq(std::tanh(t)) / std::pow(std::cosh(t), 4);
    const double got = ideal_pattern_probability({1, 0, 0, 1}, {0.0, 0.0}, {t});
    CHECK(got == doctest::Approx(want).epsilon(1e-14));
    CHECK(oracle::detection_probability({1, 0, 0, 1}, t, 0.0, 0.0, 1.0, 1.0, 0, 3) ==
          doctest::Approx(want).epsilon(1e-14));
    CHECK(check::error_of([] { ideal_pattern_probability({-1, 0, 0, 0}, {}, {0.1}); }) == Errc::domain);
}

TEST_CASE("property: ideal probabilities are normalized within the truncation") {
    gen::for_all(20, 14, [](gen::Gen &g) {
        const SourceParams src{g.gain(0.2), 1e-12};
        const RotationSpec rot{g.wide_angle(), g.wide_angle()};
        const int nmax = choose_truncation(src);
        double total = 0.0;
        for (int ah = 0; ah <= nmax; ++ah)
            for (int av = 0; ah + av <= nmax; ++av)
                for (int bh = 0; bh <= nmax; ++bh)
                    for (int bv = 0; bh + bv <= nmax; ++bv) total += ideal_pattern_probability({ah, av, bh, bv}, rot, src);
        CHECK(std::abs(total - 1.0) <= src.trunc_epsilon + 1e-14);
    });
}

TEST_CASE("property: singlet symmetry under equal rotations") {
    gen::for_all(20, 15, [](gen::Gen &g) {
        const SourceParams src{g.gain(0.2), 1e-12};
        const double a = g.wide_angle();
        for (int ah = 0; ah <= 3; ++ah)
            for (int av = 0; av <= 3; ++av)
                for (int bh = 0; bh <= 3; ++bh) {
                    const int bv = ah + av - bh;
                    if (bv < 0) continue;
                    const ModeOccupation c{ah, av, bh, bv};
                    CHECK(ideal_pattern_probability(c, {a, a}, src) ==
                          doctest::Approx(ideal_pattern_probability(c, {0.0, 0.0}, src)).epsilon(1e-12));
                }
    });
}

TEST_CASE("property: brute-force equivalence up to six photons") {
    gen::for_all(20, 16, [](gen::Gen &g) {
        const double tau = g.gain(0.3);
        const double phi = g.wide_angle();
        const double theta = g.wide_angle();
        const oracle::State s = oracle::rotate(oracle::rotate(oracle::pdc_state(tau, 3), 0, phi), 2, theta);
        for (int ah = 0; ah <= 6; ++ah)
            for (int av = 0; ah + av <= 6; ++av)
                for (int bh = 0; ah + av + bh <= 6; ++bh)
                    for (int bv = 0; ah + av + bh + bv <= 6; ++bv) {
                        auto it = s.find({ah, av, bh, bv});
                        const double want = it == s.end() ? 0.0 : sq(it->second);
                        const double got = ideal_pattern_probability({ah, av, bh, bv}, {phi, theta}, {tau});
                        CHECK(std::abs(got - want) < 1e-10);
                    }
    });
}

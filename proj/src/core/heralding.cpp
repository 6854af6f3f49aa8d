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

#include "pdcmetro/heralding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <string>

#include "optimize.hpp"
#include "parallel.hpp"
#include "pdcmetro/error.hpp"
#include "pdcmetro/estimation.hpp"

namespace pdcm {

namespace {

constexpr int kPhiGrid = 64;

ProbabilityModel herald_model(const HeraldSpec &spec) {
    if (spec.k < 0) throw Error(Errc::domain, "herald photon number must be non-negative");
    ProbabilityModel model(SourceParams{spec.tau, spec.trunc_epsilon}, DetectorModel{std::nullopt, spec.eta, spec.eta});
    if (spec.k > model.nmax()) {
        throw Error(Errc::domain, "herald K=" + std::to_string(spec.k) + " exceeds the truncation support nmax=" +
                                      std::to_string(model.nmax()));
    }
    return model;
}

// sum_n P(n) P(Binomial(n, eta) >= k) weighted by 1 and by n.
std::pair<double, double> accepted_mass(const HeraldSpec &spec, int nmax) {
    const double x = std::pow(std::tanh(spec.tau), 2);
    double mass = 0.0;
    double photons = 0.0;
    for (int n = 0; n <= nmax; ++n) {
        const double pn = (n + 1) * std::pow(x, n) * (1 - x) * (1 - x);
        double pass = 0.0;
        double binom = 1.0;
        for (int j = 0; j <= n; ++j) {
            if (j >= spec.k) pass += binom * std::pow(spec.eta, j) * std::pow(1.0 - spec.eta, n - j);
            binom = binom * (n - j) / (j + 1);
        }
        mass += pn * pass;
        photons += n * pn * pass;
    }
    return {mass, photons};
}

}  // namespace

HeraldCell conditional_fisher_per_photon(const HeraldSpec &spec, std::optional<double> phi) {
    const ProbabilityModel model = herald_model(spec);
    const auto [mass, photons] = accepted_mass(spec, model.nmax());
    if (!(photons > 0.0)) throw Error(Errc::domain, "herald accepts no sensing-path photons");

    const PatternDistribution layout = model.distribution({0.0, 0.0});
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < layout.patterns.size(); ++i) {
        if (layout.patterns[i].path_b() >= spec.k) keep.push_back(i);
    }
    // Renormalized by the (phi-independent) acceptance so that the floor in
    // fisher_information acts on conditional probabilities.
    const Family family = [&](double angle) {
        const PatternDistribution d = model.distribution({angle, 0.0}, true);
        FamilyPoint out;
        for (std::size_t i : keep) {
            out.p.push_back(d.probabilities[i] / mass);
            out.dp.push_back(d.derivatives[i] / mass);
        }
        return out;
    };
    auto conditional_fisher = [&](double angle) { return fisher_information(family, angle).information; };

    double at = 0.0;
    double info = 0.0;
    if (phi) {
        at = *phi;
        info = conditional_fisher(at);
    } else {
        const double step = std::numbers::pi / kPhiGrid;
        for (int k = 0; k < kPhiGrid; ++k) {
            const double angle = (k + 0.5) * step;
            const double v = conditional_fisher(angle);
            if (v > info) {
                info = v;
                at = angle;
            }
        }
        const double refined = detail::golden_maximize(conditional_fisher, at - step, at + step, 1e-7);
        const double v = conditional_fisher(refined);
        if (v > info) {
            info = v;
            at = refined;
        }
    }
    HeraldCell out;
    out.phi = at;
    out.acceptance = mass;
    out.fisher = info;
    out.mean_photons = photons / mass;
    out.value = info / out.mean_photons;
    return out;
}

HeraldTable herald_table(double tau, const std::vector<double> &etas, const std::vector<int> &ks,
                         double trunc_epsilon) {
    HeraldTable table;
    table.tau = tau;
    table.etas = etas;
    table.ks = ks;
    table.cells.assign(ks.size(), std::vector<HeraldCell>(etas.size()));
    detail::parallel_for(ks.size() * etas.size(), [&](std::size_t idx) {
        const std::size_t i = idx / etas.size();
        const std::size_t j = idx % etas.size();
        table.cells[i][j] = conditional_fisher_per_photon(HeraldSpec{ks[i], etas[j], tau, trunc_epsilon});
    });
    return table;
}

void write_csv(std::ostream &out, const HeraldTable &table) {
    char buf[64];
    out << "K";
    for (double eta : table.etas) {
        std::snprintf(buf, sizeof buf, ",%g", eta);
        out << buf;
    }
    out << '\n';
    for (std::size_t i = 0; i < table.ks.size(); ++i) {
        out << table.ks[i];
        for (const auto &cell : table.cells[i]) {
            std::snprintf(buf, sizeof buf, ",%.6f", cell.value);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<std::pair<DetectionPattern, double>> sensing_distribution(const HeraldSpec &spec, double phi,
                                                                      std::optional<int> reference_clicks) {
    const ProbabilityModel model(SourceParams{spec.tau, spec.trunc_epsilon},
                                 DetectorModel{std::nullopt, spec.eta, spec.eta});
    const PatternDistribution d = model.distribution({phi, 0.0});
    std::map<std::pair<int, int>, double> acc;
    for (std::size_t i = 0; i < d.patterns.size(); ++i) {
        const auto &r = d.patterns[i];
        if (reference_clicks && r.path_b() != *reference_clicks) continue;
        acc[{r.ah, r.av}] += d.probabilities[i];
    }
    std::vector<std::pair<DetectionPattern, double>> out;
    for (const auto &[key, p] : acc) out.emplace_back(DetectionPattern{key.first, key.second, 0, 0}, p);
    return out;
}

}  // namespace pdcm

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

#include "pdcmetro/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

using ClickPair = std::pair<int, int>;

// G(k, c_h) = w_{r_h}(c_h) w_{r_v}(n - c_h) for the k-th click pair (r_h, r_v).
Eigen::MatrixXd path_weights(const PovmTable &table, const std::vector<ClickPair> &clicks, int n) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(clicks.size()), n + 1);
    for (std::size_t k = 0; k < clicks.size(); ++k) {
        for (int ch = 0; ch <= n; ++ch) {
            g(static_cast<Eigen::Index>(k), ch) = table(clicks[k].first, ch) * table(clicks[k].second, n - ch);
        }
    }
    return g;
}

struct Contraction {
    Eigen::MatrixXd prob;
    Eigen::MatrixXd dprob;
};

// Sum over pair numbers of G_a p_n G_b^T for the given a-path and b-path click
// pairs; entry (i, j) is P(clicks_a[i], clicks_b[j]).
Contraction contract(const ProbabilityModel &model, const std::vector<ClickPair> &clicks_a,
                     const std::vector<ClickPair> &clicks_b, const RotationSpec &rot, bool with_derivative) {
    const auto na = static_cast<Eigen::Index>(clicks_a.size());
    const auto nb = static_cast<Eigen::Index>(clicks_b.size());
    Contraction out{Eigen::MatrixXd::Zero(na, nb), Eigen::MatrixXd::Zero(na, nb)};
    for (int n = 0; n <= model.nmax(); ++n) {
        const PairBlock block = pair_block(n, rot, model.source(), with_derivative);
        const Eigen::MatrixXd ga = path_weights(model.table_a(), clicks_a, n);
        const Eigen::MatrixXd gb = path_weights(model.table_b(), clicks_b, n);
        out.prob.noalias() += ga * block.prob * gb.transpose();
        if (with_derivative) out.dprob.noalias() += ga * block.dprob * gb.transpose();
    }
    return out;
}

std::vector<ClickPair> all_pairs(int max_clicks) {
    std::vector<ClickPair> out;
    for (int h = 0; h <= max_clicks; ++h) {
        for (int v = 0; v <= max_clicks; ++v) out.emplace_back(h, v);
    }
    return out;
}

template <typename T>
std::size_t index_of(std::vector<T> &list, const T &value) {
    auto it = std::find(list.begin(), list.end(), value);
    if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
    list.push_back(value);
    return list.size() - 1;
}

}  // namespace

std::string to_string(const DetectionPattern &r) {
    std::string out;
    for (int v : {r.ah, r.av, r.bh, r.bv}) {
        out += v < 10 ? std::to_string(v) : "[" + std::to_string(v) + "]";
    }
    return out;
}

std::string ConditioningClass::label() const { return std::to_string(clicks_a) + "+" + std::to_string(clicks_b); }

std::vector<DetectionPattern> class_patterns(const ConditioningClass &cls, int max_clicks_a, int max_clicks_b) {
    if (cls.clicks_a < 0 || cls.clicks_b < 0) throw Error(Errc::domain, "conditioning click totals must be >= 0");
    std::vector<DetectionPattern> out;
    for (int ah = cls.clicks_a; ah >= 0; --ah) {
        const int av = cls.clicks_a - ah;
        if (ah > max_clicks_a || av > max_clicks_a) continue;
        for (int bh = 0; bh <= cls.clicks_b; ++bh) {
            const int bv = cls.clicks_b - bh;
            if (bh > max_clicks_b || bv > max_clicks_b) continue;
            out.push_back({ah, av, bh, bv});
        }
    }
    return out;
}

double PatternDistribution::total() const { return std::accumulate(probabilities.begin(), probabilities.end(), 0.0); }

double PatternDistribution::probability(const DetectionPattern &r) const {
    for (std::size_t k = 0; k < patterns.size(); ++k) {
        if (patterns[k] == r) return probabilities[k];
    }
    return 0.0;
}

ProbabilityModel::ProbabilityModel(const SourceParams &src, const DetectorModel &det)
    : src_(src),
      det_(det),
      nmax_(choose_truncation(src)),
      table_a_(det.table_a(nmax_)),
      table_b_(det.table_b(nmax_)),
      surviving_a_(surviving_photon_weights(det.base_table(nmax_), det.eta_a)) {
    if (det.arity && *det.arity < 1) throw Error(Errc::domain, "multiplexing arity must be >= 1");
}

void ProbabilityModel::check_pattern(const DetectionPattern &r) const {
    const int ma = max_clicks_a();
    const int mb = max_clicks_b();
    if (r.ah < 0 || r.av < 0 || r.bh < 0 || r.bv < 0 || r.ah > ma || r.av > ma || r.bh > mb || r.bv > mb) {
        throw Error(Errc::domain, "detection pattern " + to_string(r) + " exceeds the detector arity");
    }
}

double ProbabilityModel::probability(const DetectionPattern &r, const RotationSpec &rot) const {
    check_pattern(r);
    const auto c = contract(*this, {{r.ah, r.av}}, {{r.bh, r.bv}}, rot, false);
    return c.prob(0, 0);
}

PatternDistribution ProbabilityModel::subset(const std::vector<DetectionPattern> &patterns, const RotationSpec &rot,
                                             bool with_derivative) const {
    std::vector<ClickPair> ca;
    std::vector<ClickPair> cb;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    where.reserve(patterns.size());
    for (const auto &r : patterns) {
        check_pattern(r);
        where.emplace_back(index_of(ca, ClickPair{r.ah, r.av}), index_of(cb, ClickPair{r.bh, r.bv}));
    }
    PatternDistribution out;
    out.rotation = rot;
    out.patterns = patterns;
    if (patterns.empty()) return out;
    const auto c = contract(*this, ca, cb, rot, with_derivative);
    for (const auto &[i, j] : where) {
        out.probabilities.push_back(c.prob(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        if (with_derivative) {
            out.derivatives.push_back(c.dprob(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }
    return out;
}

PatternDistribution ProbabilityModel::distribution(const RotationSpec &rot, bool with_derivative) const {
    const auto ca = all_pairs(max_clicks_a());
    const auto cb = all_pairs(max_clicks_b());
    const auto c = contract(*this, ca, cb, rot, with_derivative);
    PatternDistribution out;
    out.rotation = rot;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        for (std::size_t j = 0; j < cb.size(); ++j) {
            out.patterns.push_back({ca[i].first, ca[i].second, cb[j].first, cb[j].second});
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            out.probabilities.push_back(c.prob(ii, jj));
            if (with_derivative) out.derivatives.push_back(c.dprob(ii, jj));
        }
    }
    return out;
}

PatternDistribution ProbabilityModel::conditional(const RotationSpec &rot, const ConditioningClass &cls,
                                                  bool with_derivative) const {
    PatternDistribution out = subset(class_patterns(cls, max_clicks_a(), max_clicks_b()), rot, with_derivative);
    const double mass = out.total();
    if (!(mass > 0.0)) {
        throw Error(Errc::domain, "conditioning class " + cls.label() + " has zero probability");
    }
    double dmass = 0.0;
    if (with_derivative) dmass = std::accumulate(out.derivatives.begin(), out.derivatives.end(), 0.0);
    for (std::size_t k = 0; k < out.probabilities.size(); ++k) {
        const double p = out.probabilities[k];
        out.probabilities[k] = p / mass;
        if (with_derivative) out.derivatives[k] = (out.derivatives[k] - p * dmass / mass) / mass;
    }
    out.conditioning = cls.label();
    out.class_mass = mass;
    out.class_mass_derivative = dmass;
    return out;
}

std::vector<double> ProbabilityModel::class_mass_by_pairs(const RotationSpec &rot,
                                                          const ConditioningClass &cls) const {
    const auto patterns = class_patterns(cls, max_clicks_a(), max_clicks_b());
    std::vector<ClickPair> ca;
    std::vector<ClickPair> cb;
    for (const auto &r : patterns) {
        index_of(ca, ClickPair{r.ah, r.av});
        index_of(cb, ClickPair{r.bh, r.bv});
    }
    std::vector<double> out(nmax_ + 1, 0.0);
    if (patterns.empty()) return out;
    for (int n = 0; n <= nmax_; ++n) {
        const PairBlock block = pair_block(n, rot, src_);
        const Eigen::MatrixXd ga = path_weights(table_a_, ca, n);
        const Eigen::MatrixXd gb = path_weights(table_b_, cb, n);
        // Every (a, b) combination of class click pairs is a class pattern.
        out[n] = (ga * block.prob * gb.transpose()).sum();
    }
    return out;
}

MeanPhotons ProbabilityModel::mean_photons(int phi_samples) const {
    MeanPhotons out;
    const double x = std::pow(std::tanh(src_.tau), 2);
    for (int n = 0; n <= nmax_; ++n) {
        const double pn = (n + 1) * std::pow(x, n) * (1 - x) * (1 - x);
        out.path_a += n * pn;
    }
    out.path_b = out.path_a;

    // The 2+2 class mass depends on phi for multiplexed detectors, so the
    // conditional means are taken over the phi-averaged event rates.
    const auto patterns = class_patterns(ConditioningClass{}, max_clicks_a(), max_clicks_b());
    std::vector<ClickPair> ca;
    std::vector<ClickPair> cb;
    for (const auto &r : patterns) {
        index_of(ca, ClickPair{r.ah, r.av});
        index_of(cb, ClickPair{r.bh, r.bv});
    }
    if (patterns.empty()) return out;
    double pre = 0.0;
    double detected = 0.0;
    double mass = 0.0;
    for (int k = 0; k < phi_samples; ++k) {
        const RotationSpec rot{2.0 * std::numbers::pi * k / phi_samples, 0.0};
        for (int n = 0; n <= nmax_; ++n) {
            const PairBlock block = pair_block(n, rot, src_);
            const Eigen::MatrixXd ga = path_weights(table_a_, ca, n);
            const Eigen::MatrixXd gb = path_weights(table_b_, cb, n);
            Eigen::MatrixXd ga_photons(ga.rows(), ga.cols());
            for (Eigen::Index i = 0; i < ga.rows(); ++i) {
                const auto [rh, rv] = ca[static_cast<std::size_t>(i)];
                for (int ch = 0; ch <= n; ++ch) {
                    ga_photons(i, ch) = surviving_a_(rh, ch) * table_a_(rv, n - ch) +
                                        table_a_(rh, ch) * surviving_a_(rv, n - ch);
                }
            }
            const Eigen::MatrixXd right = block.prob * gb.transpose();
            const double m = (ga * right).sum();
            mass += m;
            pre += n * m;
            detected += (ga_photons * right).sum();
        }
    }
    if (mass > 0.0) {
        out.conditional_a = pre / mass;
        out.conditional_a_detected = detected / mass;
    }
    return out;
}

double detection_probability(const DetectionPattern &r, const RotationSpec &rot, const SourceParams &src,
                             const DetectorModel &det) {
    return ProbabilityModel(src, det).probability(r, rot);
}

PatternDistribution fourfold_distribution(const RotationSpec &rot, const SourceParams &src,
                                          const DetectorModel &det) {
    return ProbabilityModel(src, det).conditional(rot, ConditioningClass{});
}

MeanPhotons mean_photon_numbers(const SourceParams &src, const DetectorModel &det) {
    return ProbabilityModel(src, det).mean_photons();
}

}  // namespace pdcm

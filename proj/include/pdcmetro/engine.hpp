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

// Detection-pattern probabilities
//
//   P_r(phi) = sum_c w_{r_ah}(c_ah) w_{r_av}(c_av) w_{r_bh}(c_bh) w_{r_bv}(c_bv) p_c(phi, theta)
//
// with lossy per-mode POVM tables. The sum runs over pair numbers n <= nmax;
// within each n only c_ah (and c_bh) are free, since c_a = c_b = n.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdcmetro/fock.hpp"
#include "pdcmetro/povm.hpp"

namespace pdcm {

/// Click counts per mode (a_h, a_v, b_h, b_v).
struct DetectionPattern {
    int ah = 0;
    int av = 0;
    int bh = 0;
    int bv = 0;

    int path_a() const { return ah + av; }
    int path_b() const { return bh + bv; }
    bool operator==(const DetectionPattern &) const = default;
};

/// "2011"-style label; entries above 9 are bracketed.
std::string to_string(const DetectionPattern &r);

/// A class of events selected by the click totals in each path.
struct ConditioningClass {
    int clicks_a = 2;
    int clicks_b = 2;

    std::string label() const;
};

/// Patterns of a class in display order: a-path (k,0), (k-1,1), ..., (0,k)
/// then b-path (0,k), ..., (k,0). For the 2+2 class this yields
/// 2002 2011 2020 1102 1111 1120 0202 0211 0220.
std::vector<DetectionPattern> class_patterns(const ConditioningClass &cls, int max_clicks_a, int max_clicks_b);

struct PatternDistribution {
    RotationSpec rotation;
    std::vector<DetectionPattern> patterns;
    std::vector<double> probabilities;
    /// d/dphi of each probability; empty unless requested.
    std::vector<double> derivatives;
    /// Set when the entries are renormalized within a conditioning class.
    std::optional<std::string> conditioning;
    /// Unconditioned probability of the class (1 for full distributions).
    double class_mass = 1.0;
    /// d/dphi of class_mass.
    double class_mass_derivative = 0.0;

    double total() const;
    double probability(const DetectionPattern &r) const;
};

/// Mean sensing-path and reference-path photon numbers before loss.
struct MeanPhotons {
    double path_a = 0.0;
    double path_b = 0.0;
    /// Sensing-path mean before loss, conditioned on a 2+2 event and
    /// averaged over phi.
    double conditional_a = 0.0;
    /// Same conditioning, counting only the sensing-path photons that survive
    /// the lumped loss and reach the detectors.
    double conditional_a_detected = 0.0;
};

/// Source and detectors with their truncation and lossy tables precomputed.
class ProbabilityModel {
   public:
    ProbabilityModel(const SourceParams &src, const DetectorModel &det);

    const SourceParams &source() const { return src_; }
    const DetectorModel &detector() const { return det_; }
    int nmax() const { return nmax_; }
    int max_clicks_a() const { return table_a_.max_clicks(); }
    int max_clicks_b() const { return table_b_.max_clicks(); }
    const PovmTable &table_a() const { return table_a_; }
    const PovmTable &table_b() const { return table_b_; }

    double probability(const DetectionPattern &r, const RotationSpec &rot) const;

    /// Every pattern within the arities, in lexicographic (ah, av, bh, bv) order.
    PatternDistribution distribution(const RotationSpec &rot, bool with_derivative = false) const;

    /// Arbitrary pattern list, unnormalized.
    PatternDistribution subset(const std::vector<DetectionPattern> &patterns, const RotationSpec &rot,
                               bool with_derivative = false) const;

    /// Class patterns renormalized to sum to one.
    PatternDistribution conditional(const RotationSpec &rot, const ConditioningClass &cls = {},
                                    bool with_derivative = false) const;

    /// Per pair number n, the unconditioned probability that the event falls
    /// in `cls` while the source emitted n pairs.
    std::vector<double> class_mass_by_pairs(const RotationSpec &rot, const ConditioningClass &cls) const;

    MeanPhotons mean_photons(int phi_samples = 256) const;

   private:
    void check_pattern(const DetectionPattern &r) const;

    SourceParams src_;
    DetectorModel det_;
    int nmax_ = 0;
    PovmTable table_a_;
    PovmTable table_b_;
    Eigen::MatrixXd surviving_a_;
};

double detection_probability(const DetectionPattern &r, const RotationSpec &rot, const SourceParams &src,
                             const DetectorModel &det);

/// The nine 2+2 patterns, renormalized per rotation.
PatternDistribution fourfold_distribution(const RotationSpec &rot, const SourceParams &src, const DetectorModel &det);

MeanPhotons mean_photon_numbers(const SourceParams &src, const DetectorModel &det);

}  // namespace pdcm

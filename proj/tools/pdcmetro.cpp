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

// pdcmetro command-line tool. Talks to the library only through pdcmetro.h.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pdcmetro/pdcmetro.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(pdcm_status s) {
    if (s == PDCM_OK) return;
    const std::string msg = std::string(pdcm_status_name(s)) + ": " + pdcm_last_error();
    if (s == PDCM_E_ARGUMENT) throw UsageError(msg);
    throw DataError(msg);
}

// --- output -----------------------------------------------------------------

using Cell = std::variant<std::monostate, double, long long, std::string>;

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json to_json(const Cell &c) {
    if (std::holds_alternative<double>(c)) {
        const double v = std::get<double>(c);
        if (!std::isfinite(v)) return format_double(v);
        return v;
    }
    if (std::holds_alternative<long long>(c)) return std::get<long long>(c);
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    return nullptr;
}

std::string to_csv(const Cell &c) {
    if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
    if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    return {};
}

struct Report {
    std::vector<std::pair<std::string, Cell>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, Cell>> summary;
};

struct Common {
    double tau = 0.061;
    double eta_a = 0.23;
    double eta_b = 0.12;
    std::string d = "4";
    std::string theta = "0";
    std::string phi_start = "0";
    std::string phi_stop = "2pi";
    int phi_steps = 100;
    double eps = 1e-12;
    std::uint64_t seed = 12345;
    std::string out = "-";
    std::string format = "csv";
};

void emit(const Report &r, const Common &c) {
    std::ostringstream os;
    if (c.format == "json") {
        json doc;
        json meta = json::object();
        for (const auto &[k, v] : r.meta) meta[k] = to_json(v);
        doc["meta"] = meta;
        doc["columns"] = r.columns;
        json rows = json::array();
        for (const auto &row : r.rows) {
            json jr = json::array();
            for (const auto &cell : row) jr.push_back(to_json(cell));
            rows.push_back(jr);
        }
        doc["rows"] = rows;
        if (!r.summary.empty()) {
            json s = json::object();
            for (const auto &[k, v] : r.summary) s[k] = to_json(v);
            doc["summary"] = s;
        }
        os << doc.dump(2) << '\n';
    } else {
        for (const auto &[k, v] : r.meta) os << "# " << k << '=' << to_csv(v) << '\n';
        for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
        os << '\n';
        for (const auto &row : r.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << to_csv(row[i]);
            os << '\n';
        }
        for (const auto &[k, v] : r.summary) os << "# summary " << k << '=' << to_csv(v) << '\n';
    }
    if (c.out == "-") {
        std::cout << os.str();
        std::cout.flush();
    } else {
        std::ofstream f(c.out, std::ios::binary);
        if (!f) throw DataError("cannot open output file " + c.out);
        f << os.str();
        if (!f) throw DataError("write failed on " + c.out);
    }
}

// --- parameters -------------------------------------------------------------

// Radians by default; accepts "pi" multiples ("2pi", "0.5pi") and a "deg" suffix.
double parse_angle(const std::string &text, const char *flag) {
    std::string s = text;
    double scale = 1.0;
    auto strip = [&](const std::string &suffix, double factor) {
        if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
            s.erase(s.size() - suffix.size());
            scale = factor;
            return true;
        }
        return false;
    };
    if (!strip("deg", std::numbers::pi / 180.0)) strip("pi", std::numbers::pi);
    if (s.empty() && scale == std::numbers::pi) return std::numbers::pi;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v * scale;
    } catch (const std::exception &) {
        throw UsageError(std::string(flag) + ": cannot read angle '" + text + "'");
    }
}

int parse_arity(const std::string &d) {
    if (d == "inf") return 0;
    try {
        std::size_t used = 0;
        const int v = std::stoi(d, &used);
        if (used == d.size() && v >= 1 && v <= 64) return v;
    } catch (const std::exception &) {
    }
    throw UsageError("--d: expected an arity in 1..64 or 'inf', got '" + d + "'");
}

std::vector<double> phi_grid(const Common &c) {
    const double lo = parse_angle(c.phi_start, "--phi-start");
    const double hi = parse_angle(c.phi_stop, "--phi-stop");
    if (c.phi_steps < 1) throw UsageError("--phi-steps must be at least 1");
    std::vector<double> grid;
    for (int k = 0; k < c.phi_steps; ++k) grid.push_back(lo + (hi - lo) * k / c.phi_steps);
    return grid;
}

template <typename T>
std::vector<T> parse_list(const std::string &text, const char *flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof()) throw UsageError(std::string(flag) + ": bad list entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

struct Model {
    pdcm_model *ptr = nullptr;
    explicit Model(const Common &c) { check(pdcm_model_create(c.tau, c.eta_a, c.eta_b, parse_arity(c.d), c.eps, &ptr)); }
    ~Model() { pdcm_model_destroy(ptr); }
    Model(const Model &) = delete;
    Model &operator=(const Model &) = delete;
};

void model_meta(Report &r, const std::string &command, const Common &c, const Model *m) {
    r.meta.emplace_back("tool", std::string("pdcmetro ") + pdcm_version());
    r.meta.emplace_back("command", command);
    r.meta.emplace_back("tau", c.tau);
    r.meta.emplace_back("eta_a", c.eta_a);
    r.meta.emplace_back("eta_b", c.eta_b);
    r.meta.emplace_back("d", c.d);
    r.meta.emplace_back("theta", parse_angle(c.theta, "--theta"));
    r.meta.emplace_back("trunc_epsilon", c.eps);
    if (m) {
        pdcm_model_info info;
        check(pdcm_model_get_info(m->ptr, &info));
        r.meta.emplace_back("nmax", static_cast<long long>(info.nmax));
    }
    r.meta.emplace_back("seed", static_cast<long long>(c.seed));
}

void add_common(CLI::App *app, Common &c, bool model_flags = true, bool grid_flags = true) {
    if (model_flags) {
        app->add_option("--tau", c.tau, "parametric gain")->check(CLI::Range(0.0, 0.999))->capture_default_str();
        app->add_option("--eta-a", c.eta_a, "sensing-path efficiency")->check(CLI::Range(0.0, 1.0))->capture_default_str();
        app->add_option("--eta-b", c.eta_b, "reference-path efficiency")->check(CLI::Range(0.0, 1.0))->capture_default_str();
        app->add_option("--d", c.d, "detectors per mode, or 'inf' for number resolution")->capture_default_str();
        app->add_option("--theta", c.theta, "reference-path rotation (rad, 'deg' or 'pi' suffix)")->capture_default_str();
        app->add_option("--eps", c.eps, "neglected tail probability")->check(CLI::Range(1e-300, 0.5))->capture_default_str();
    }
    if (grid_flags) {
        app->add_option("--phi-start", c.phi_start, "first phase")->capture_default_str();
        app->add_option("--phi-stop", c.phi_stop, "end of the phase range (excluded)")->capture_default_str();
        app->add_option("--phi-steps", c.phi_steps, "phase samples")->check(CLI::PositiveNumber)->capture_default_str();
    }
    app->add_option("--seed", c.seed, "random seed")->capture_default_str();
    app->add_option("--out", c.out, "output file, '-' for stdout")->capture_default_str();
    app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

// --- commands ---------------------------------------------------------------

void cmd_fringes(const Common &c) {
    const Model m(c);
    const double theta = parse_angle(c.theta, "--theta");
    Report r;
    model_meta(r, "fringes", c, &m);
    r.meta.emplace_back("conditioning", std::string("2+2"));
    r.columns.push_back("phi");
    for (int i = 0; i < PDCM_FOURFOLD_PATTERNS; ++i) r.columns.push_back(std::string("p") + pdcm_fourfold_label(i));
    for (double phi : phi_grid(c)) {
        double p[PDCM_FOURFOLD_PATTERNS];
        check(pdcm_fourfold(m.ptr, phi, theta, p, nullptr));
        std::vector<Cell> row{phi};
        for (double v : p) row.emplace_back(v);
        r.rows.push_back(std::move(row));
    }
    emit(r, c);
}

struct FisherFlags {
    int fit_angles = 13;
    double counts = 1e4;
    int bootstrap = 1000;
    int ml_points = 8;
    int ml_reps = 500;
    int ml_samples = 1000;
};

void cmd_fisher(const Common &c, const FisherFlags &f) {
    const Model m(c);
    const double theta = parse_angle(c.theta, "--theta");
    const std::vector<double> grid = phi_grid(c);
    const std::size_t n = grid.size();

    std::vector<double> fisher(n);
    for (std::size_t i = 0; i < n; ++i) check(pdcm_fisher(m.ptr, grid[i], theta, &fisher[i], nullptr));
    double snl = 0.0;
    check(pdcm_snl(m.ptr, &snl));
    pdcm_advantage adv;
    check(pdcm_max_advantage(m.ptr, theta, &adv));

    // Expected counts at evenly spaced angles feed the fringe fit.
    std::vector<double> fit_phis;
    std::vector<double> fit_counts;
    for (int j = 0; j < f.fit_angles; ++j) {
        const double phi = kTwoPi * j / f.fit_angles;
        double p[PDCM_FOURFOLD_PATTERNS];
        check(pdcm_fourfold(m.ptr, phi, theta, p, nullptr));
        fit_phis.push_back(phi);
        for (double v : p) fit_counts.push_back(v * f.counts);
    }
    std::vector<double> central(n), low(n), high(n);
    pdcm_band_options bo = pdcm_band_defaults();
    bo.iterations = f.bootstrap;
    bo.seed = c.seed;
    check(pdcm_fisher_band(fit_phis.data(), fit_counts.data(), fit_phis.size(), PDCM_FOURFOLD_PATTERNS, grid.data(),
                           n, &bo, central.data(), low.data(), high.data()));

    // ML benchmark on every k-th grid row, searched over the half period
    // (in phi - theta) that contains the true phase.
    std::vector<std::optional<pdcm_ml_result>> ml(n);
    if (f.ml_points > 0) {
        const std::size_t stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(f.ml_points));
        for (std::size_t i = stride / 2, k = 0; i < n && k < static_cast<std::size_t>(f.ml_points); i += stride, ++k) {
            const double lo = theta + std::floor((grid[i] - theta) / std::numbers::pi) * std::numbers::pi;
            pdcm_ml_result res;
            check(pdcm_ml_fisher(m.ptr, theta, grid[i], f.ml_reps, f.ml_samples, lo, lo + std::numbers::pi,
                                 c.seed + i, &res));
            ml[i] = res;
        }
    }

    Report r;
    model_meta(r, "fisher", c, &m);
    r.meta.emplace_back("fit_angles", static_cast<long long>(f.fit_angles));
    r.meta.emplace_back("counts_per_angle", f.counts);
    r.meta.emplace_back("bootstrap_iterations", static_cast<long long>(f.bootstrap));
    r.meta.emplace_back("ml_repetitions", static_cast<long long>(f.ml_reps));
    r.meta.emplace_back("ml_samples", static_cast<long long>(f.ml_samples));
    r.columns = {"phi", "fisher", "fisher_fit", "band_low", "band_high", "snl", "ml_fisher", "ml_stderr"};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Cell> row{grid[i], fisher[i], central[i], low[i], high[i], snl};
        if (ml[i]) {
            row.emplace_back(ml[i]->information);
            row.emplace_back(ml[i]->standard_error);
        } else {
            row.emplace_back(std::monostate{});
            row.emplace_back(std::monostate{});
        }
        r.rows.push_back(std::move(row));
    }
    r.summary.emplace_back("snl", snl);
    r.summary.emplace_back("fisher_max", adv.fisher_max);
    r.summary.emplace_back("phi_max", adv.phi);
    r.summary.emplace_back("advantage", adv.advantage);
    emit(r, c);
}

void cmd_calibrate(const Common &c, const std::string &rates_path) {
    pdcm_rates rates;
    check(pdcm_read_rates(rates_path.c_str(), &rates));
    pdcm_calibration cal;
    check(pdcm_calibrate(&rates, parse_arity(c.d), &cal));
    Report r;
    r.meta.emplace_back("tool", std::string("pdcmetro ") + pdcm_version());
    r.meta.emplace_back("command", std::string("calibrate"));
    r.meta.emplace_back("rates", rates_path);
    r.meta.emplace_back("residual_model_d", c.d);
    r.columns = {"quantity", "value", "residual"};
    r.rows.push_back({std::string("tau"), cal.tau, std::monostate{}});
    r.rows.push_back({std::string("eta_a"), cal.eta_a, std::monostate{}});
    r.rows.push_back({std::string("eta_b"), cal.eta_b, std::monostate{}});
    r.rows.push_back({std::string("pair_probability"), cal.pair_probability, std::monostate{}});
    r.rows.push_back({std::string("singles_a"), rates.singles_a, cal.residuals.singles_a});
    r.rows.push_back({std::string("singles_b"), rates.singles_b, cal.residuals.singles_b});
    r.rows.push_back({std::string("twofold"), rates.twofold, cal.residuals.twofold});
    r.summary.emplace_back("boundary", static_cast<long long>(cal.boundary));
    emit(r, c);
}

void cmd_rates(const Common &c) {
    const Model m(c);
    pdcm_rates rates;
    check(pdcm_simulate_rates(m.ptr, &rates));
    Report r;
    model_meta(r, "rates", c, &m);
    r.columns = {"phi", "singles_a", "singles_b", "twofold"};
    // The rates do not depend on phi; one row per grid angle.
    for (double phi : phi_grid(c)) r.rows.push_back({phi, rates.singles_a, rates.singles_b, rates.twofold});
    emit(r, c);
}

void cmd_herald(const Common &c, const std::string &etas_text, const std::string &ks_text,
                const std::optional<std::string> &phi_text) {
    const auto etas = parse_list<double>(etas_text, "--etas");
    const auto ks = parse_list<int>(ks_text, "--ks");
    for (double e : etas) {
        if (!(e >= 0.0 && e <= 1.0)) throw UsageError("--etas: efficiencies must lie in [0, 1]");
    }
    std::vector<pdcm_herald_cell> cells(etas.size() * ks.size());
    if (phi_text) {
        const double phi = parse_angle(*phi_text, "--phi");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            for (std::size_t j = 0; j < etas.size(); ++j) {
                check(pdcm_herald(ks[i], etas[j], c.tau, c.eps, phi, &cells[i * etas.size() + j]));
            }
        }
    } else {
        check(pdcm_herald_table(c.tau, etas.data(), etas.size(), ks.data(), ks.size(), c.eps, cells.data()));
    }
    Report r;
    r.meta.emplace_back("tool", std::string("pdcmetro ") + pdcm_version());
    r.meta.emplace_back("command", std::string("herald"));
    r.meta.emplace_back("tau", c.tau);
    r.meta.emplace_back("trunc_epsilon", c.eps);
    r.meta.emplace_back("detectors", std::string("number-resolving"));
    r.meta.emplace_back("phi", phi_text ? Cell{parse_angle(*phi_text, "--phi")} : Cell{std::string("max")});
    r.columns.push_back("K");
    for (double e : etas) r.columns.push_back(format_double(e));
    for (std::size_t i = 0; i < ks.size(); ++i) {
        std::vector<Cell> row{static_cast<long long>(ks[i])};
        for (std::size_t j = 0; j < etas.size(); ++j) row.emplace_back(cells[i * etas.size() + j].value);
        r.rows.push_back(std::move(row));
    }
    emit(r, c);
}

struct CountFlags {
    std::string input;
    std::string map;
    std::string input_format = "auto";
    std::uint64_t window_ps = 2500;
    std::uint64_t period_ps = 12500;
    std::optional<std::uint64_t> offset_ps;
    std::uint64_t pulses = 0;
    std::size_t reorder = 256;
};

pdcm_timetag_format timetag_format(const std::string &name, const std::string &path) {
    if (name == "csv") return PDCM_TIMETAG_CSV;
    if (name == "binary") return PDCM_TIMETAG_BINARY;
    const bool bin = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    return bin ? PDCM_TIMETAG_BINARY : PDCM_TIMETAG_CSV;
}

std::string pattern_label(int ah, int av, int bh, int bv) {
    return std::to_string(ah) + std::to_string(av) + std::to_string(bh) + std::to_string(bv);
}

void cmd_count(const Common &c, const CountFlags &f) {
    pdcm_count_options o = pdcm_count_defaults();
    o.window_ps = f.window_ps;
    o.period_ps = f.period_ps;
    o.offset_ps = f.offset_ps ? static_cast<std::int64_t>(*f.offset_ps) : -1;
    o.pulses = f.pulses;
    o.reorder_capacity = f.reorder;
    pdcm_counts *counts = nullptr;
    check(pdcm_count_file(f.input.c_str(), timetag_format(f.input_format, f.input),
                          f.map.empty() ? nullptr : f.map.c_str(), &o, &counts));
    std::unique_ptr<pdcm_counts, void (*)(pdcm_counts *)> guard(counts, pdcm_counts_destroy);
    pdcm_count_summary s;
    check(pdcm_counts_get_summary(counts, &s));

    Report r;
    r.meta.emplace_back("tool", std::string("pdcmetro ") + pdcm_version());
    r.meta.emplace_back("command", std::string("count"));
    r.meta.emplace_back("input", f.input);
    r.meta.emplace_back("map", f.map.empty() ? std::string("default") : f.map);
    r.meta.emplace_back("window_ps", static_cast<long long>(s.window_ps));
    r.meta.emplace_back("period_ps", static_cast<long long>(s.period_ps));
    r.columns = {"kind", "key", "count"};
    for (int ah = 0; ah <= 4; ++ah) {
        for (int av = 0; av <= 4; ++av) {
            for (int bh = 0; bh <= 4; ++bh) {
                for (int bv = 0; bv <= 4; ++bv) {
                    const auto n = pdcm_counts_pattern(counts, pdcm_pattern{ah, av, bh, bv});
                    if (n) r.rows.push_back({std::string("pattern"), pattern_label(ah, av, bh, bv),
                                             static_cast<long long>(n)});
                }
            }
        }
    }
    for (std::uint32_t mask = 0; mask < 65536; ++mask) {
        const auto n = pdcm_counts_mask(counts, static_cast<std::uint16_t>(mask));
        if (!n) continue;
        char key[8];
        std::snprintf(key, sizeof key, "0x%04x", mask);
        r.rows.push_back({std::string("mask"), std::string(key), static_cast<long long>(n)});
    }
    r.summary.emplace_back("windows", static_cast<long long>(s.windows));
    r.summary.emplace_back("records", static_cast<long long>(s.records));
    r.summary.emplace_back("accepted_records", static_cast<long long>(s.accepted_records));
    r.summary.emplace_back("duplicate_clicks", static_cast<long long>(s.duplicate_clicks));
    r.summary.emplace_back("rejected_records", static_cast<long long>(s.rejected_records));
    r.summary.emplace_back("clicks", static_cast<long long>(s.total_clicks));
    emit(r, c);
}

void cmd_curve(const Common &c, const std::string &etas_text) {
    const auto etas = parse_list<double>(etas_text, "--etas");
    for (double e : etas) {
        if (!(e > 0.0 && e <= 1.0)) throw UsageError("--etas: efficiencies must lie in (0, 1]");
    }
    std::vector<pdcm_performance_point> pts(etas.size());
    check(pdcm_performance_curve(c.tau, c.eps, parse_arity(c.d), etas.data(), etas.size(), pts.data()));
    Report r;
    r.meta.emplace_back("tool", std::string("pdcmetro ") + pdcm_version());
    r.meta.emplace_back("command", std::string("curve"));
    r.meta.emplace_back("tau", c.tau);
    r.meta.emplace_back("d", c.d);
    r.meta.emplace_back("trunc_epsilon", c.eps);
    r.meta.emplace_back("loss", std::string("balanced"));
    r.columns = {"eta", "fisher", "phi_best", "normalized_uncertainty", "heisenberg", "snl"};
    for (const auto &p : pts) {
        r.rows.push_back({p.eta, p.fisher, p.phi_best, p.normalized_uncertainty, p.heisenberg, 1.0});
    }
    emit(r, c);
}

struct GenerateFlags {
    std::string phi = "1.0";
    std::uint64_t pulses = 1000000;
    std::uint64_t period_ps = 12500;
    double jitter_ps = 100.0;
    std::string map;
    std::string output_format = "csv";
};

void cmd_generate(const Common &c, const GenerateFlags &g) {
    const Model m(c);
    pdcm_generator_options o = pdcm_generator_defaults();
    o.pulses = g.pulses;
    o.period_ps = g.period_ps;
    o.jitter_ps = g.jitter_ps;
    o.seed = c.seed;
    std::uint64_t records = 0;
    check(pdcm_generate_file(m.ptr, parse_angle(g.phi, "--phi"), parse_angle(c.theta, "--theta"), &o,
                             g.map.empty() ? nullptr : g.map.c_str(),
                             g.output_format == "binary" ? PDCM_TIMETAG_BINARY : PDCM_TIMETAG_CSV, c.out.c_str(),
                             &records));
    std::cerr << "pdcmetro: wrote " << records << " records for " << g.pulses << " pulses (seed " << c.seed << ")\n";
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Loss-tolerant SPDC phase-estimation toolkit"};
    app.set_version_flag("--version", std::string(pdcm_version()));
    app.require_subcommand(1);

    Common fr, fi, ca, ra, he, co, cu, ge;
    FisherFlags ff;
    CountFlags cf;
    GenerateFlags gf;
    std::string rates_path;
    std::string herald_etas = "0.7,0.8,0.9,0.95,1";
    std::string herald_ks = "0,1,2,3";
    std::optional<std::string> herald_phi;
    std::string curve_etas =
        "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";

    auto *fringes = app.add_subcommand("fringes", "renormalized 2+2 pattern probabilities over phase");
    add_common(fringes, fr);

    auto *fisher = app.add_subcommand("fisher", "Fisher information, bootstrap band, ML benchmark and SNL");
    add_common(fisher, fi);
    fisher->add_option("--fit-angles", ff.fit_angles, "angles in the simulated fringe scan")
        ->check(CLI::Range(5, 10000))->capture_default_str();
    fisher->add_option("--counts", ff.counts, "2+2 events per scan angle")->check(CLI::PositiveNumber)->capture_default_str();
    fisher->add_option("--bootstrap", ff.bootstrap, "bootstrap iterations")->check(CLI::Range(100, 1000000))->capture_default_str();
    fisher->add_option("--ml-points", ff.ml_points, "phases with an ML benchmark")->check(CLI::NonNegativeNumber)->capture_default_str();
    fisher->add_option("--ml-reps", ff.ml_reps, "ML estimates per phase")->check(CLI::Range(2, 10000000))->capture_default_str();
    fisher->add_option("--ml-samples", ff.ml_samples, "events per ML estimate")->check(CLI::PositiveNumber)->capture_default_str();

    auto *calibrate = app.add_subcommand("calibrate", "recover tau, eta_a, eta_b from a rates CSV");
    ca.format = "json";
    add_common(calibrate, ca, false, false);
    calibrate->add_option("rates", rates_path, "CSV with phi,singles_a,singles_b,twofold ('-' for stdin)")->required();
    calibrate->add_option("--d", ca.d, "arity of the model used for residuals ('inf' allowed)")->capture_default_str();

    auto *rates = app.add_subcommand("rates", "model singles and two-fold rates in the calibrate input format");
    add_common(rates, ra);

    auto *herald = app.add_subcommand("herald", "heralded Fisher information per photon table");
    add_common(herald, he, false, false);
    he.tau = 0.05;
    he.eps = 1e-14;
    herald->add_option("--tau", he.tau, "parametric gain")->check(CLI::Range(0.0, 0.999))->capture_default_str();
    herald->add_option("--eps", he.eps, "neglected tail probability")->check(CLI::Range(1e-300, 0.5))->capture_default_str();
    herald->add_option("--etas", herald_etas, "comma-separated efficiencies")->capture_default_str();
    herald->add_option("--ks", herald_ks, "comma-separated herald photon numbers")->capture_default_str();
    herald->add_option("--phi", herald_phi, "fixed phase instead of the maximum");

    auto *count = app.add_subcommand("count", "coincidence patterns from a timetag stream");
    add_common(count, co, false, false);
    count->add_option("input", cf.input, "timetag file ('-' for stdin)")->required();
    count->add_option("--map", cf.map, "channel map file (channel=mode lines)");
    count->add_option("--input-format", cf.input_format, "csv, binary or auto (.bin is binary)")
        ->check(CLI::IsMember({"csv", "binary", "auto"}))->capture_default_str();
    count->add_option("--window-ps", cf.window_ps, "coincidence window")->check(CLI::PositiveNumber)->capture_default_str();
    count->add_option("--period-ps", cf.period_ps, "pulse period; 0 anchors windows at the first click")->capture_default_str();
    count->add_option("--offset-ps", cf.offset_ps, "window centre after each pulse (default half a period)");
    count->add_option("--pulses", cf.pulses, "total pulses including trailing empty ones (0 infers)")->capture_default_str();
    count->add_option("--reorder", cf.reorder, "reorder buffer in records")->capture_default_str();

    auto *curve = app.add_subcommand("curve", "normalized uncertainty against balanced loss");
    add_common(curve, cu, true, false);
    curve->add_option("--etas", curve_etas, "comma-separated efficiencies")->capture_default_str();

    auto *generate = app.add_subcommand("generate", "synthetic 16-channel timetag stream");
    add_common(generate, ge, true, false);
    generate->remove_option(generate->get_option("--format"));
    generate->add_option("--format", gf.output_format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}))->capture_default_str();
    generate->add_option("--phi", gf.phi, "phase of the sensing rotation")->capture_default_str();
    generate->add_option("--pulses", gf.pulses, "pulses to simulate")->check(CLI::PositiveNumber)->capture_default_str();
    generate->add_option("--period-ps", gf.period_ps, "pulse period")->check(CLI::Range(std::uint64_t{2}, std::uint64_t{1} << 40))->capture_default_str();
    generate->add_option("--jitter-ps", gf.jitter_ps, "Gaussian timing jitter")->check(CLI::NonNegativeNumber)->capture_default_str();
    generate->add_option("--map", gf.map, "channel map file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*fringes) cmd_fringes(fr);
        if (*fisher) cmd_fisher(fi, ff);
        if (*calibrate) cmd_calibrate(ca, rates_path);
        if (*rates) cmd_rates(ra);
        if (*herald) cmd_herald(he, herald_etas, herald_ks, herald_phi);
        if (*count) cmd_count(co, cf);
        if (*curve) cmd_curve(cu, curve_etas);
        if (*generate) cmd_generate(ge, gf);
    } catch (const UsageError &e) {
        std::cerr << "pdcmetro: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError &e) {
        std::cerr << "pdcmetro: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception &e) {
        std::cerr << "pdcmetro: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}

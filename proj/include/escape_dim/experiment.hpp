#pragma once

// Command-line front end: configuration, run records, the five commands and
// their CSV / SVG / JSON output.
//
// Exit codes: 0 success, 1 a verification check failed, 2 configuration or
// usage error, 3 domain or budget error, 4 output could not be written.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bound_core.hpp"
#include "covering_combinatorics.hpp"
#include "json_io.hpp"
#include "shift_model.hpp"
#include "torus_model.hpp"

namespace escape_dim {

inline constexpr const char* kToolName = "escape-dim";
inline constexpr const char* kToolVersion = "0.1.0";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string mode;
    std::string system = "catmap";
    std::optional<double> mu;
    std::optional<double> delta;
    std::optional<double> r;
    std::optional<std::string> constants;
    std::optional<std::string> constants_file;
    std::string suite = "all";
    int max_n = 5;
    int max_nt = 20;
    std::optional<int> N;
    std::optional<int> T;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> csv;
    double tol = 1e-9;
    double hole = 0.1;
    int grid_per_box = 4;
    std::optional<std::uint64_t> samples;
    bool timing = false;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline Json to_json(const ExperimentConfig& c) {
    Json j = {{"mode", c.mode},       {"system", c.system},     {"suite", c.suite},
              {"max-n", c.max_n},     {"max-nt", c.max_nt},     {"tol", c.tol},
              {"hole", c.hole},       {"grid-per-box", c.grid_per_box}, {"timing", c.timing}};
    auto put = [&j](const char* key, const auto& opt) {
        if (opt) j[key] = *opt;
    };
    put("mu", c.mu);
    put("delta", c.delta);
    put("r", c.r);
    put("constants", c.constants);
    put("constants-file", c.constants_file);
    put("N", c.N);
    put("T", c.T);
    put("seed", c.seed);
    put("out", c.out);
    put("csv", c.csv);
    put("samples", c.samples);
    return j;
}

/// Reads a config object; keys match the long command-line flags.
inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig c = {}) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        try {
            if (key == "mode") c.mode = v.get<std::string>();
            else if (key == "system") c.system = v.get<std::string>();
            else if (key == "mu") c.mu = v.get<double>();
            else if (key == "delta") c.delta = v.get<double>();
            else if (key == "r") c.r = v.get<double>();
            else if (key == "constants") c.constants = v.get<std::string>();
            else if (key == "constants-file") c.constants_file = v.get<std::string>();
            else if (key == "suite") c.suite = v.get<std::string>();
            else if (key == "max-n") c.max_n = v.get<int>();
            else if (key == "max-nt") c.max_nt = v.get<int>();
            else if (key == "N") c.N = v.get<int>();
            else if (key == "T") c.T = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "csv") c.csv = v.get<std::string>();
            else if (key == "tol") c.tol = v.get<double>();
            else if (key == "hole") c.hole = v.get<double>();
            else if (key == "grid-per-box") c.grid_per_box = v.get<int>();
            else if (key == "samples") c.samples = v.get<std::uint64_t>();
            else if (key == "timing") c.timing = v.get<bool>();
            else throw ConfigError("config: unknown key '" + key + "'");
        } catch (const Json::exception&) {
            throw ConfigError("config: key '" + key + "' has the wrong type");
        }
    }
    return c;
}

struct CheckResult {
    std::string name;
    bool passed = false;

    friend bool operator==(const CheckResult&, const CheckResult&) = default;
};

struct RunRecord {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string mode;
    Json config = Json::object();
    Json results = Json::object();
    std::vector<CheckResult> checks;
    std::optional<double> wall_time_s;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    void check(const std::string& name, bool ok) { checks.push_back({name, ok}); }

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline Json to_json(const RunRecord& r) {
    Json checks = Json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}});
    Json j = {{"tool", r.tool},       {"version", r.version}, {"mode", r.mode},
              {"config", r.config},   {"results", r.results}, {"checks", checks},
              {"passed", r.passed()}};
    if (r.wall_time_s) j["wall_time_s"] = *r.wall_time_s;
    return j;
}

inline RunRecord record_from_json(const Json& j) {
    RunRecord r;
    try {
        r.tool = j.at("tool").get<std::string>();
        r.version = j.at("version").get<std::string>();
        r.mode = j.at("mode").get<std::string>();
        r.config = j.at("config");
        r.results = j.at("results");
        for (const auto& c : j.at("checks")) r.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>()});
        if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("run record: ") + e.what());
    }
    return r;
}

inline std::string dump_record(const RunRecord& r) { return to_json(r).dump(); }

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    f.flush();
    if (!f) throw IoError("failed writing '" + path + "'");
}

/// Comma-separated table with a header row, '.' decimals and LF line endings.
inline std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += cells[i];
        }
        s += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
}

struct CurvePoint {
    double delta = 0.0;
    double phi = 0.0;
};

/// delta -> phi(y, sqrt(1 - delta)) on `points` equally spaced deltas in [0, 1].
inline std::vector<CurvePoint> phi_curve(double y, int points = 2000) {
    detail::require(points >= 2, "phi_curve: need at least two points");
    std::vector<CurvePoint> out;
    out.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double d = static_cast<double>(i) / (points - 1);
        out.push_back({d, phi(y, std::sqrt(1.0 - d))});
    }
    return out;
}

/// 800 x 500 line plot of the curve with the threshold marked when one exists.
inline std::string curve_svg(const std::vector<CurvePoint>& curve, double y, const ThresholdResult& thr) {
    constexpr double W = 800, H = 500, left = 70, right = 20, top = 30, bottom = 60;
    double lo = 0.0, hi = 0.0;
    for (const auto& p : curve) {
        lo = std::min(lo, p.phi);
        hi = std::max(hi, p.phi);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto px = [&](double d) { return left + d * (W - left - right); };
    auto py = [&](double v) { return top + (hi - v) / (hi - lo) * (H - top - bottom); };

    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
    s << "  <rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
    // axes: delta along the bottom, phi on the left, plus the zero line
    s << "  <line class=\"axis\" x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n";
    s << "  <line class=\"axis\" x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    s << "  <line class=\"zero\" x1=\"" << left << "\" y1=\"" << py(0.0) << "\" x2=\"" << W - right << "\" y2=\""
      << py(0.0) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (int i = 0; i <= 10; ++i) {
        const double d = i / 10.0;
        s << "  <text x=\"" << px(d) << "\" y=\"" << H - bottom + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
          << std::setprecision(1) << d << std::setprecision(3) << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        s << "  <text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << v
          << "</text>\n";
    }
    s << "  <text class=\"xlabel\" x=\"" << 0.5 * (left + W - right) << "\" y=\"" << H - 15
      << "\" font-size=\"14\" text-anchor=\"middle\">delta</text>\n";
    s << "  <text class=\"ylabel\" x=\"18\" y=\"" << 0.5 * (top + H - bottom)
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << 0.5 * (top + H - bottom)
      << ")\">phi</text>\n";
    s << "  <text x=\"" << left + 10 << "\" y=\"" << top - 10 << "\" font-size=\"13\">y = " << std::setprecision(6) << y
      << std::setprecision(3) << "</text>\n";
    s << "  <polyline class=\"curve\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (i) s << ' ';
        s << px(curve[i].delta) << ',' << py(curve[i].phi);
    }
    s << "\"/>\n";
    if (thr.drop_possible) {
        s << "  <circle class=\"root\" data-delta=\"" << fmt_double(thr.delta_O) << "\" cx=\"" << px(thr.delta_O)
          << "\" cy=\"" << py(0.0) << "\" r=\"5\" fill=\"crimson\"/>\n";
        s << "  <text class=\"root-label\" x=\"" << px(thr.delta_O) - 8 << "\" y=\"" << py(0.0) - 12
          << "\" font-size=\"13\" text-anchor=\"end\">delta_O = " << std::setprecision(6) << thr.delta_O
          << "</text>\n";
    } else {
        s << "  <text class=\"flag\" x=\"" << left + 10 << "\" y=\"" << top + 16
          << "\" font-size=\"13\" fill=\"crimson\">no resolvable root: phi &lt;= 0 away from delta = 1</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline double need(const std::optional<double>& v, const char* flag) {
    if (!v) throw ConfigError(std::string("missing required option --") + flag);
    return *v;
}

inline int need(const std::optional<int>& v, const char* flag) {
    if (!v) throw ConfigError(std::string("missing required option --") + flag);
    return *v;
}

inline std::uint64_t need_seed(const ExperimentConfig& c) {
    if (!c.seed) throw ConfigError("missing required option --seed for a stochastic run");
    return *c.seed;
}

inline SystemConstants resolve_constants(const ExperimentConfig& c, const std::string& fallback) {
    SystemConstants k;
    const std::string preset = c.constants.value_or(fallback);
    if (preset == "shift") k = SystemConstants::shift();
    else if (preset == "catmap") k = SystemConstants::catmap();
    else if (!c.constants_file) throw ConfigError("unknown constants preset '" + preset + "' (use shift or catmap)");
    if (c.constants_file) {
        std::ifstream f(*c.constants_file);
        if (!f) throw ConfigError("cannot read constants file '" + *c.constants_file + "'");
        Json j;
        try {
            f >> j;
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("constants file: ") + e.what());
        }
        k = constants_from_json(j, k);
    }
    return k;
}

inline void maybe_write_record(const ExperimentConfig& c, const RunRecord& rec) {
    if (c.out) write_text_file(*c.out, dump_record(rec) + "\n");
}

} // namespace detail

inline RunRecord cmd_bound(const ExperimentConfig& c) {
    const double mu = detail::need(c.mu, "mu");
    const double delta = detail::need(c.delta, "delta");
    const double r = detail::need(c.r, "r");
    const SystemConstants k = detail::resolve_constants(c, "shift");

    RunRecord rec;
    rec.mode = "bound";
    rec.config = to_json(c);
    const BoundReport b = codim_lower(r, mu, delta, k);
    rec.results["bound"] = to_json(b);
    rec.results["threshold"] = to_json(delta_threshold(mu > 0.0 ? mu : 1e-300));
    if (mu > 0.0 && r < 1.0) rec.results["reference"] = to_json(reference_bounds(r, mu, r, 2 * k.L));

    // the certified drop never exceeds the codimension read off the optimised dimension bound
    if (std::isfinite(b.dim_upper)) rec.check("codim_within_dim_upper", b.codim_lower <= std::max(0.0, k.L - b.dim_upper) + 1e-12);

    if (c.csv) {
        const std::vector<std::string> header{"mu", "delta", "r", "phi", "T", "codim_lower", "dim_upper", "drop_achieved"};
        const std::vector<std::string> row{fmt_double(mu),        fmt_double(delta),         fmt_double(r),
                                           fmt_double(b.phi_value), fmt_double(b.schedule.T), fmt_double(b.codim_lower),
                                           fmt_double(b.dim_upper), b.drop_achieved ? "true" : "false"};
        write_text_file(*c.csv, csv_table(header, {row}));
    }
    return rec;
}

inline RunRecord cmd_threshold(const ExperimentConfig& c) {
    const double mu = detail::need(c.mu, "mu");
    RunRecord rec;
    rec.mode = "threshold";
    rec.config = to_json(c);
    const ThresholdResult t = delta_threshold(mu, c.tol);
    rec.results = to_json(t);
    rec.results["lower_bound"] = 1.0 - 0.25 * mu * mu;
    if (t.drop_possible) rec.check("above_lower_bound", t.delta_O > 1.0 - 0.25 * mu * mu);
    if (c.csv)
        write_text_file(*c.csv, csv_table({"mu", "delta_O", "drop_possible"},
                                          {{fmt_double(mu), fmt_double(t.delta_O), t.drop_possible ? "true" : "false"}}));
    return rec;
}

inline RunRecord cmd_curve(const ExperimentConfig& c) {
    const double mu = detail::need(c.mu, "mu");
    detail::require(mu > 0.0 && mu <= 1.0, "curve: mu must lie in (0,1]");
    const auto curve = phi_curve(mu, 2000);
    const ThresholdResult t = delta_threshold(mu, c.tol);
    const std::string csv_path = c.csv.value_or("phi_curve.csv");
    const std::string svg_path = c.out.value_or("phi_curve.svg");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(curve.size());
    for (const auto& p : curve) rows.push_back({fmt_double(p.delta), fmt_double(p.phi)});
    write_text_file(csv_path, csv_table({"delta", "phi"}, rows));
    write_text_file(svg_path, curve_svg(curve, mu, t));

    RunRecord rec;
    rec.mode = "curve";
    rec.config = to_json(c);
    rec.results = {{"rows", curve.size()},
                   {"csv", csv_path},
                   {"svg", svg_path},
                   {"root", t.drop_possible ? num(t.delta_O) : Json(nullptr)},
                   {"root_flagged", !t.drop_possible},
                   {"threshold", to_json(t)}};
    return rec;
}

namespace detail {

/// Emits one JSON line per check and records it.
class CheckSink {
public:
    CheckSink(RunRecord& rec, std::ostream* lines) : rec_(rec), lines_(lines) {}

    void emit(const std::string& name, bool ok, Json detail) {
        rec_.check(name, ok);
        if (lines_) {
            detail["check"] = name;
            detail["passed"] = ok;
            *lines_ << detail.dump() << '\n';
        }
    }

    void line(Json detail) {
        if (lines_) *lines_ << detail.dump() << '\n';
    }

private:
    RunRecord& rec_;
    std::ostream* lines_;
};

inline Json combinatorics_suite(const ExperimentConfig& c, CheckSink& sink) {
    const std::uint64_t seed = need_seed(c);
    const std::uint64_t samples = c.samples.value_or(20000);
    Json out;

    // block decomposition: random vectors on a 5 x 5 (delta, epsilon / delta) grid plus exhaustive small N
    const double deltas[] = {0.3, 0.5, 0.7, 0.9, 0.99};
    const double fractions[] = {0.1, 0.3, 0.5, 0.7, 0.9};
    SuiteTally random, exhaustive;
    std::uint64_t cell = 0;
    for (double d : deltas)
        for (double f : fractions) {
            random += block_lemma_random(d, f * d, 16, samples, splitmix64(seed + cell++));
            for (int N = 1; N <= 8; ++N) exhaustive += block_lemma_exhaustive(d, f * d, N);
        }
    sink.emit("block_lemma_random", random.passed(), to_json(random));
    sink.emit("block_lemma_exhaustive", exhaustive.passed(), to_json(exhaustive));
    out["block_lemma_random"] = to_json(random);
    out["block_lemma_exhaustive"] = to_json(exhaustive);

    SuiteTally stirling;
    for (int N = 1; N <= 64; ++N)
        for (int i = 1; i <= 19; ++i) {
            ++stirling.instances;
            if (!binomial_vs_stirling(N, i / 20.0).holds) ++stirling.failures;
        }
    sink.emit("binomial_entropy_bound", stirling.passed(), to_json(stirling));
    out["binomial_entropy_bound"] = to_json(stirling);

    // Cantor set: exact covers by 2^n intervals of length 3^-n
    CoverSchedule cs;
    cs.rho = 1.0 / 3.0;
    cs.C = 0.5;
    for (int n = 1; n <= 16; ++n) cs.alpha.push_back(std::log(std::pow(2.0, n)) / (n * std::log(3.0)));
    const double bound = limsup_dim_bound(cs);
    const auto set = cantor_intervals(14);
    std::vector<double> scales;
    for (int k = 2; k <= 12; ++k) scales.push_back(std::pow(3.0, -k));
    const BoxCountFit fit = box_count_dimension(set, scales);
    const double target = std::log(2.0) / std::log(3.0);
    const bool cantor_ok = std::abs(fit.slope - target) <= 0.02 && fit.slope <= bound + 0.03;
    sink.emit("cantor_box_count", cantor_ok, {{"slope", fit.slope}, {"limsup_bound", bound}, {"target", target}});
    out["cantor"] = {{"slope", fit.slope}, {"limsup_bound", bound}};

    const SuiteTally disc = discretization_random(std::max<std::uint64_t>(1000, samples / 10), seed);
    sink.emit("discretization_gap", disc.passed(), to_json(disc));
    out["discretization_gap"] = to_json(disc);
    return out;
}

inline Json shift_suite(const ExperimentConfig& c, CheckSink& sink) {
    detail::require(c.max_n >= 1 && c.max_n <= 5, "verify: --max-n must lie in [1,5]");
    detail::require(c.max_nt >= 1 && c.max_nt <= 28, "verify: --max-nt must lie in [1,28]");
    const ShiftSweepConfig cfg = default_shift_sweep(c.max_n, 4, c.max_nt);
    const ShiftSweepResult res = run_shift_sweep(cfg);
    for (const auto& cell : res.cells) {
        Json j = to_json(cell);
        j["check"] = "shift_cell";
        j["passed"] = cell.uppcov_failures == 0 && cell.bowen_failures == 0;
        sink.line(j);
    }
    sink.emit("shift_uppcov", res.uppcov.passed(), to_json(res.uppcov));
    sink.emit("shift_bowen_ball", res.bowen.passed(), to_json(res.bowen));
    sink.emit("shift_markov", res.markov.passed(), to_json(res.markov));

    SuiteTally disjoint;
    for (int T = 1; T <= std::min(12, c.max_nt); ++T)
        for (const auto& S : cfg.targets)
            for (const auto& eps : cfg.epsilons)
                if (Rational(1, 10) < eps && eps < Rational(1)) disjoint += verify_disjoint_boxes(T, Rational(1, 10), eps, S);
    sink.emit("shift_disjoint_boxes", disjoint.passed(), to_json(disjoint));

    // the counting engine against literal enumeration on the small cells
    SuiteTally agree;
    for (int N = 1; N <= std::min(3, c.max_n); ++N)
        for (int T = 1; T <= 3; ++T) {
            if (N * T > c.max_nt) continue;
            for (const auto& S : cfg.targets) {
                const auto counts = count_cell(N, T, S, cfg.epsilons);
                for (std::size_t k = 0; k < cfg.epsilons.size(); ++k)
                    for (std::uint32_t J = 0; J < (1u << N); ++J) {
                        ++agree.instances;
                        const auto words = enumerate_A_J(T, cfg.epsilons[k], S, IndexSet::from_mask(J), N);
                        if (cylinder_count(words, N * T) != counts.per_J[k][J]) ++agree.failures;
                    }
                for (const auto& d : cfg.deltas) {
                    ++agree.instances;
                    const int need = rational_ceil_times(d, N * T);
                    std::uint64_t fast = 0;
                    for (std::size_t h = static_cast<std::size_t>(need); h < counts.total_hist.size(); ++h) fast += counts.total_hist[h];
                    if (cylinder_count(enumerate_A(N, T, d, S), N * T) != fast) ++agree.failures;
                }
            }
        }
    sink.emit("shift_route_agreement", agree.passed(), to_json(agree));

    const std::uint64_t total = res.uppcov.instances + res.bowen.instances + res.markov.instances + disjoint.instances;
    return {{"uppcov", to_json(res.uppcov)},
            {"bowen_ball", to_json(res.bowen)},
            {"markov", to_json(res.markov)},
            {"disjoint_boxes", to_json(disjoint)},
            {"route_agreement", to_json(agree)},
            {"instances", total},
            {"cells", res.cells.size()}};
}

inline Json torus_suite(const ExperimentConfig& c, CheckSink& sink) {
    const std::uint64_t seed = need_seed(c);
    const HyperbolicMap hm = cat_map();
    Json out;

    const double expected = 0.5 * (3.0 + std::sqrt(5.0));
    const double mu_x = hm.m[0][0] * hm.u_dir.x + hm.m[0][1] * hm.u_dir.y;
    const double mu_y = hm.m[1][0] * hm.u_dir.x + hm.m[1][1] * hm.u_dir.y;
    const bool eig_ok = std::abs(hm.lambda_u - expected) < 1e-12 && std::abs(mu_x - hm.lambda_u * hm.u_dir.x) < 1e-12 &&
                        std::abs(mu_y - hm.lambda_u * hm.u_dir.y) < 1e-12;
    sink.emit("eigen_data", eig_ok, {{"lambda_u", hm.lambda_u}, {"log_lambda_u", hm.log_lambda()}});

    bool tess_ok = true, incl_ok = true, balls_ok = true;
    SuiteTally overlap;
    double c0 = 0.0;
    for (double r : {0.05, 0.1, 0.2}) {
        const auto segs = tessellate(TorusPoint{}, r, 1.0);
        const auto tc = check_tessellation(segs);
        tess_ok = tess_ok && tc.disjoint && tc.covering;
        incl_ok = incl_ok && bowen_inclusion(r).holds;
        for (int t = 2; t <= 20; ++t) {
            const auto cc = lemma_covering_count(t, r, hm);
            ++overlap.instances;
            if (!cc.holds) ++overlap.failures;
            c0 = std::max(c0, cc.c0_needed);
            balls_ok = balls_ok && coveringballs_check(t, r, hm).holds;
        }
    }
    sink.emit("tessellation", tess_ok, Json::object());
    sink.emit("bowen_inclusion", incl_ok, Json::object());
    sink.emit("overlap_count", overlap.passed() && c0 <= 2.0, {{"tally", to_json(overlap)}, {"c0_fit", c0}});
    sink.emit("covering_balls", balls_ok, Json::object());
    out["c0_fit"] = c0;

    // cores and neighbourhoods: exact route against the grid route on random unions
    SeededStream rng(seed, 0x70305);
    SuiteTally duality;
    for (int trial = 0; trial < 20; ++trial) {
        RectUnion U;
        const int count = 1 + static_cast<int>(rng.below(3));
        for (int i = 0; i < count; ++i)
            U.rects.push_back(Rect::make(rng.uniform(), rng.uniform(), rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6)));
        const double r = rng.uniform(0.01, 0.05);
        const int n = static_cast<int>(std::ceil(8.0 / r)) + 8;
        const RectUnion core = sigma_core(U, r), nb = neighborhood(U, r);
        const GridEstimate gcore = sigma_core_grid(U, r, n), gnb = neighborhood_grid(U, r, n);
        ++duality.instances;
        const bool ok = std::abs(gcore.measure - core.measure()) <= gcore.error + 2.0 / n &&
                        std::abs(gnb.measure - nb.measure()) <= gnb.error + 2.0 / n &&
                        core.measure() <= U.measure() + 1e-12 && U.measure() <= nb.measure() + 1e-12;
        if (!ok) ++duality.failures;
    }
    sink.emit("core_neighborhood", duality.passed(), to_json(duality));

    const RectUnion half{{Rect::make(0.0, 0.0, 0.5, 1.0)}};
    const auto p = equidistribution_estimate(TorusPoint::from_double(0.3, 0.7), half, 0.1, 30,
                                             c.samples.value_or(100000), seed, hm);
    sink.emit("equidistribution_t30", p.residual <= 3.0 * p.standard_error, to_json(p));
    out["equidistribution_t30"] = to_json(p);
    return out;
}

} // namespace detail

/// Runs the requested suites. Check lines go to `lines` (if given) as they finish.
inline RunRecord cmd_verify(const ExperimentConfig& c, std::ostream* lines = nullptr) {
    const std::string& s = c.suite;
    if (s != "combinatorics" && s != "shift" && s != "torus" && s != "all")
        throw ConfigError("unknown suite '" + s + "' (use combinatorics, shift, torus or all)");
    RunRecord rec;
    rec.mode = "verify";
    rec.config = to_json(c);
    detail::CheckSink sink(rec, lines);
    if (s == "combinatorics" || s == "all") rec.results["combinatorics"] = detail::combinatorics_suite(c, sink);
    if (s == "shift" || s == "all") rec.results["shift"] = detail::shift_suite(c, sink);
    if (s == "torus" || s == "all") rec.results["torus"] = detail::torus_suite(c, sink);
    return rec;
}

inline RunRecord cmd_simulate(const ExperimentConfig& c) {
    if (c.system != "catmap") throw ConfigError("simulate: unknown system '" + c.system + "' (only catmap)");
    EscapeSampleConfig sc;
    sc.seed = detail::need_seed(c);
    sc.delta = detail::need(c.delta, "delta");
    sc.N = detail::need(c.N, "N");
    sc.T = detail::need(c.T, "T");
    sc.r = c.r.value_or(0.01);
    sc.grid_per_box = c.grid_per_box;
    sc.O = RectUnion::complement_of_square(0.0, 0.0, c.hole);
    sc.constants = detail::resolve_constants(c, "catmap");
    const HyperbolicMap hm = cat_map();
    if (std::abs(sc.constants.lambda_max - hm.log_lambda()) > 1e-9)
        throw ConfigError("simulate: constants do not describe the cat map");

    const EmpiricalDimReport rep = sample_escape_set(sc, hm);
    RunRecord rec;
    rec.mode = "simulate";
    rec.config = to_json(c);
    rec.results = {{"report", to_json(rep)},
                   {"system", {{"matrix", hm.m}, {"lambda_u", hm.lambda_u}, {"x", {sc.x.xd(), sc.x.yd()}}}},
                   {"O", to_json(sc.O)},
                   {"constants", to_json(sc.constants)}};
    rec.check("consistent", rep.consistent);
    if (c.csv) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < rep.counts.size(); ++k)
            rows.push_back({std::to_string(rep.horizons[k]), fmt_double(rep.scales[k]), std::to_string(rep.counts[k])});
        write_text_file(*c.csv, csv_table({"horizon", "scale", "count"}, rows));
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Entry point

/// Prints the record; exit status 1 when any check failed.
inline int report(const RunRecord& rec, std::ostream& out, std::ostream& err) {
    out << dump_record(rec) << '\n';
    if (rec.passed()) return 0;
    for (const auto& c : rec.checks)
        if (!c.passed) err << "check failed: " << c.name << '\n';
    return 1;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Codimension bounds for sets of points escaping an open set on average", kToolName};
    ExperimentConfig flags;
    std::string mode, system, config_path;
    double mu = 0, delta = 0, r = 0, tol = 0, hole = 0;
    int max_n = 0, max_nt = 0, N = 0, T = 0, gpb = 0;
    std::uint64_t seed = 0, samples = 0;
    std::string constants, constants_file, suite, out_path, csv_path;
    bool timing = false;

    app.add_option("mode", mode, "bound | threshold | curve | verify | simulate");
    app.add_option("system", system, "model for simulate (catmap)");
    auto* o_mu = app.add_option("--mu", mu, "measure of the 5r-core of O");
    auto* o_delta = app.add_option("--delta", delta, "escape proportion");
    auto* o_r = app.add_option("--r", r, "radius");
    auto* o_const = app.add_option("--constants", constants, "constants preset: shift | catmap");
    auto* o_cfile = app.add_option("--constants-file", constants_file, "JSON file with system constants");
    auto* o_suite = app.add_option("--suite", suite, "combinatorics | shift | torus | all");
    auto* o_maxn = app.add_option("--max-n", max_n, "largest block count in the shift sweep");
    auto* o_maxnt = app.add_option("--max-nt", max_nt, "largest horizon N*T in the shift sweep");
    auto* o_N = app.add_option("--N", N, "number of blocks");
    auto* o_T = app.add_option("--T", T, "block length");
    auto* o_seed = app.add_option("--seed", seed, "random seed");
    auto* o_out = app.add_option("--out", out_path, "output path (JSON record, or SVG for curve)");
    auto* o_csv = app.add_option("--csv", csv_path, "CSV output path");
    auto* o_tol = app.add_option("--tol", tol, "threshold tolerance");
    auto* o_hole = app.add_option("--hole", hole, "half-width of the square removed from the torus");
    auto* o_gpb = app.add_option("--grid-per-box", gpb, "samples per finest box");
    auto* o_samples = app.add_option("--samples", samples, "Monte Carlo sample count");
    auto* o_timing = app.add_flag("--timing", timing, "include wall time in the record");
    app.add_option("--config", config_path, "JSON config with the same keys as the long flags");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot read config '" + config_path + "'");
            Json j;
            try {
                f >> j;
            } catch (const Json::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
            cfg = config_from_json(j);
        }
        if (!mode.empty()) cfg.mode = mode;
        if (!system.empty()) cfg.system = system;
        if (o_mu->count()) cfg.mu = mu;
        if (o_delta->count()) cfg.delta = delta;
        if (o_r->count()) cfg.r = r;
        if (o_const->count()) cfg.constants = constants;
        if (o_cfile->count()) cfg.constants_file = constants_file;
        if (o_suite->count()) cfg.suite = suite;
        if (o_maxn->count()) cfg.max_n = max_n;
        if (o_maxnt->count()) cfg.max_nt = max_nt;
        if (o_N->count()) cfg.N = N;
        if (o_T->count()) cfg.T = T;
        if (o_seed->count()) cfg.seed = seed;
        if (o_out->count()) cfg.out = out_path;
        if (o_csv->count()) cfg.csv = csv_path;
        if (o_tol->count()) cfg.tol = tol;
        if (o_hole->count()) cfg.hole = hole;
        if (o_gpb->count()) cfg.grid_per_box = gpb;
        if (o_samples->count()) cfg.samples = samples;
        if (o_timing->count()) cfg.timing = timing;
        if (cfg.mode.empty()) throw ConfigError("missing mode");

        RunRecord rec;
        if (cfg.mode == "bound") rec = cmd_bound(cfg);
        else if (cfg.mode == "threshold") rec = cmd_threshold(cfg);
        else if (cfg.mode == "curve") rec = cmd_curve(cfg);
        else if (cfg.mode == "verify") rec = cmd_verify(cfg, &out);
        else if (cfg.mode == "simulate") rec = cmd_simulate(cfg);
        else throw ConfigError("unknown mode '" + cfg.mode + "'");

        if (cfg.timing)
            rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cfg.out && cfg.mode != "curve") detail::maybe_write_record(cfg, rec);
        return report(rec, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return 4;
    } catch (const BudgetError& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace escape_dim

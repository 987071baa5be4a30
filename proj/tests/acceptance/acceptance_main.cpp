// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "escape_dim/experiment.hpp"

using namespace escape_dim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* title;
    double time_limit_s;  // <= 0: no limit
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome threshold_reproduction() {
    const double d = delta_threshold(0.8).delta_O;
    return {std::abs(d - 0.9888) <= 5e-4, fmt("delta_threshold(0.8) = %.10f, |d - 0.9888| = %.2e", d, std::abs(d - 0.9888))};
}

Outcome phi_identities() {
    double worst0 = 0.0, worst1 = 0.0;
    int nonneg = 0;
    for (int i = 0; i < 1000; ++i) {
        const double y = i / 999.0;
        worst0 = std::max(worst0, std::abs(phi(y, 0.0) - std::log(1.0 / (1.0 - y / 2.0))));
        worst1 = std::max(worst1, std::abs(phi(y, 1.0) + std::log1p(y / 4.0)));
        if (i > 0 && i < 999 && !(phi(y, y / 2.0) < 0.0)) ++nonneg;
    }
    return {worst0 <= 1e-12 && worst1 <= 1e-12 && nonneg == 0,
            fmt("max err at s=0: %.2e, at s=1: %.2e, phi(y,y/2) >= 0 at %g points", worst0, worst1, nonneg)};
}

Outcome threshold_bracketing() {
    int bad = 0;
    double slack = 1.0;
    for (int i = 1; i <= 99; ++i) {
        const double y = i / 100.0;
        const double d = delta_threshold(y).delta_O;
        const double lb = 1.0 - y * y / 4.0;
        if (!(d > lb)) ++bad;
        slack = std::min(slack, d - lb);
    }
    return {bad == 0, fmt("violations: %g of 99, min(delta_O - (1 - y^2/4)) = %.3e", bad, slack)};
}

double golden_max(double delta) {
    auto f = [delta](double z) { return z * (delta - z) / (1.0 - z); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = delta;
    double c = b - g * (b - a), d = a + g * (b - a);
    while (b - a > 1e-12) {
        if (f(c) > f(d)) b = d;
        else a = c;
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    return 0.5 * (a + b);
}

Outcome optimizer_agreement() {
    double worst_z = 0.0;
    for (int i = 10; i <= 99; ++i) {
        const double delta = i / 100.0;
        worst_z = std::max(worst_z, std::abs(z_star(delta).z - golden_max(delta)));
    }
    double worst_gap = -1e300;
    int cells = 0;
    for (const auto& k : {SystemConstants::shift(), SystemConstants::catmap()}) {
        const double r = k.r2() / 5.0;
        for (double y : {0.3, 0.5, 0.8, 0.91, 1.0})
            for (double delta : {0.98, 0.99, 0.995, 0.999, 0.9999}) {
                const auto b = codim_lower(r, y, delta, k);
                double best = k.L - b.dim_upper;
                for (int i = 1; i < 500; ++i) {
                    const double z = delta * i / 500.0;
                    for (int j = 0; j <= 40; ++j) {
                        const double T = b.schedule.T * std::pow(16.0, j / 40.0) * (1.0 + 1e-12);
                        best = std::max(best, k.L - dim_upper(z, T, y, delta, k, b.schedule));
                    }
                }
                worst_gap = std::max(worst_gap, b.codim_lower - std::max(0.0, best));
                ++cells;
            }
    }
    return {worst_z <= 1e-6 && worst_gap <= 1e-12,
            fmt("max |z* - golden| = %.2e; max(codim_lower - grid max of L - dim_upper) = %.3e over %g cells",
                worst_z, worst_gap, cells)};
}

Outcome stirling_bound() {
    int fails = 0, n = 0;
    for (int N = 1; N <= 64; ++N)
        for (int i = 1; i <= 19; ++i, ++n)
            if (!binomial_vs_stirling(N, i / 20.0).holds) ++fails;
    return {fails == 0, fmt("%g instances, %g failures", n, fails)};
}

Outcome block_lemma() {
    const double deltas[] = {0.5, 0.7, 0.9, 0.99, 1.0};
    const double fractions[] = {0.1, 0.3, 0.5, 0.7, 0.9};
    SuiteTally random, exhaustive;
    std::uint64_t cell = 0;
    for (double d : deltas)
        for (double f : fractions) {
            random += block_lemma_random(d, f * d, 16, 100000, splitmix64(20240 + cell++));
            for (int N = 1; N <= 8; ++N) exhaustive += block_lemma_exhaustive(d, f * d, N);
        }
    return {random.passed() && exhaustive.passed() && random.instances == 2500000,
            fmt("random: %g vectors, %g failures; exhaustive: %g vectors", static_cast<double>(random.instances),
                static_cast<double>(random.failures + exhaustive.failures), static_cast<double>(exhaustive.instances))};
}

Outcome shift_suite() {
    const auto res = run_shift_sweep(default_shift_sweep(5, 4, 20));
    std::ostringstream s;
    s << "cells " << res.cells.size() << "; uppcov " << res.uppcov.instances << "/" << res.uppcov.failures
      << " failed; bowen " << res.bowen.instances << "/" << res.bowen.failures << " failed; markov "
      << res.markov.instances << "/" << res.markov.failures << " failed";
    return {res.passed() && res.uppcov.instances > 0 && res.bowen.instances > 0, s.str()};
}

Outcome cantor_slope() {
    CoverSchedule cs;
    cs.rho = 1.0 / 3.0;
    cs.C = 0.5;
    for (int n = 1; n <= 16; ++n) cs.alpha.push_back(std::log(std::pow(2.0, n)) / (n * std::log(3.0)));
    const double bound = limsup_dim_bound(cs);
    std::vector<double> scales;
    for (int k = 2; k <= 12; ++k) scales.push_back(std::pow(3.0, -k));
    const auto set = cantor_intervals(14);
    const double slope = box_count_dimension(set, scales).slope;
    const double target = std::log(2.0) / std::log(3.0);
    return {std::abs(slope - target) <= 0.02 && slope <= bound + 0.03,
            fmt("slope %.6f, ln2/ln3 %.6f, limsup bound %.6f", slope, target, bound)};
}

Outcome torus_geometry() {
    const HyperbolicMap hm = cat_map();
    bool tess = true;
    int over = 0, checked = 0;
    for (double r : {0.05, 0.1, 0.2}) {
        const auto c = check_tessellation(tessellate(TorusPoint::from_double(0.123, 0.456), r, 2.0));
        tess = tess && c.disjoint && c.covering;
        for (int t = 2; t <= 20; ++t, ++checked) {
            const auto cc = lemma_covering_count(t, r, hm);
            const double eta = hm.log_lambda();
            if (static_cast<double>(cc.exact) > std::exp(eta * t) * (1.0 + 2.0 * std::exp(-eta * t))) ++over;
        }
    }
    const RectUnion half{{Rect::make(0.0, 0.0, 0.5, 1.0)}};
    const auto p = equidistribution_estimate(TorusPoint::from_double(0.3, 0.7), half, 0.1, 30, 100000, 2025, hm);
    const bool eq = std::abs(p.target - 0.5) < 1e-12 && p.residual <= 3.0 * p.standard_error;
    std::ostringstream s;
    s << "tessellation " << (tess ? "exact" : "BROKEN") << "; overlap " << checked - over << "/" << checked
      << " within bound; t=30 estimate " << p.estimate << " vs 0.5, " << p.residual / p.standard_error << " SE";
    return {tess && over == 0 && eq, s.str()};
}

Outcome end_to_end() {
    const HyperbolicMap hm = cat_map();
    const std::pair<int, int> horizons[] = {{3, 4}, {3, 6}, {4, 5}, {3, 7}};
    int runs = 0, inconsistent = 0;
    double lowest = 2.0;
    double y5r = 0.0, thr = 1.0;
    for (double delta : {0.985, 0.99, 0.999, 1.0})
        for (auto [N, T] : horizons)
            for (std::uint64_t seed : {1u, 2u}) {
                EscapeSampleConfig cfg;
                cfg.O = RectUnion::complement_of_square(0.0, 0.0, 0.1);
                cfg.r = 0.01;
                cfg.delta = delta;
                cfg.N = N;
                cfg.T = T;
                cfg.seed = seed;
                const auto rep = sample_escape_set(cfg, hm);
                y5r = rep.y5r;
                thr = rep.delta_threshold;
                if (!(rep.y5r >= 0.9 && delta >= rep.delta_threshold + 0.001)) continue;
                ++runs;
                if (!(rep.exponent <= 1.0 - rep.theoretical_codim + 0.1)) ++inconsistent;
                lowest = std::min(lowest, rep.exponent);
            }
    return {runs > 0 && inconsistent == 0 && lowest < 1.0 - 1e-3,
            fmt("mu(core) %.4f, threshold %.6f; ", y5r, thr) +
                fmt("%g runs, %g inconsistent, lowest exponent %.4f", runs, inconsistent, lowest)};
}

Outcome determinism() {
    const std::vector<std::string> args{"simulate", "catmap", "--delta", "0.999", "--r", "0.05",
                                        "--N", "3", "--T", "6", "--seed", "7"};
    std::ostringstream a, b, err;
    const int ca = run_cli(args, a, err), cb = run_cli(args, b, err);
    return {ca == 0 && cb == 0 && a.str() == b.str() && !a.str().empty(),
            fmt("exit codes %g/%g, %g bytes", ca, cb, static_cast<double>(a.str().size())) +
                (a.str() == b.str() ? ", identical" : ", DIFFERENT")};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "threshold reproduction", 1.0, threshold_reproduction},
        {2, "phi identities", 0.0, phi_identities},
        {3, "threshold bracketing", 0.0, threshold_bracketing},
        {4, "optimizer agreement", 0.0, optimizer_agreement},
        {5, "binomial entropy bound", 5.0, stirling_bound},
        {6, "block decomposition lemma", 60.0, block_lemma},
        {7, "shift covering suite", 120.0, shift_suite},
        {8, "Cantor box-count slope", 10.0, cantor_slope},
        {9, "torus geometry", 0.0, torus_geometry},
        {10, "end-to-end consistency", 600.0, end_to_end},
        {11, "determinism", 0.0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::string limit = c.time_limit_s > 0.0 ? fmt(" (limit %.0f s)", c.time_limit_s) : "";
        if (!in_time) limit += " TIME LIMIT EXCEEDED";
        std::printf("AC%-2d %s  %-28s %8.3f s%s  %s\n", c.id, pass ? "PASS" : "FAIL", c.title, secs, limit.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures;
}

#pragma once

// Measure-free ingredients of the covering argument: the block-decomposition
// lemma, the entropy bound on binomial coefficients, the limsup dimension
// lemma and the real-time/discrete-time discretisation gap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bound_core.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace escape_dim {

using BigInt = boost::multiprecision::cpp_int;

/// Per-block Birkhoff averages a_1..a_N, each in [0,1].
struct BlockAverageVector {
    std::vector<double> a;

    std::size_t N() const { return a.size(); }

    double mean() const {
        return a.empty() ? 0.0 : std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    }
};

/// Sorted subset of {1, ..., N}.
struct IndexSet {
    std::vector<int> elements;

    std::size_t size() const { return elements.size(); }
    bool contains(int i) const { return std::binary_search(elements.begin(), elements.end(), i); }

    /// Subset encoded as a bitmask: bit (i - 1) set for every i in the set.
    static IndexSet from_mask(std::uint32_t mask) {
        IndexSet J;
        for (int i = 0; i < 32; ++i)
            if (mask >> i & 1u) J.elements.push_back(i + 1);
        return J;
    }

    std::uint32_t mask() const {
        std::uint32_t m = 0;
        for (int i : elements) m |= 1u << (i - 1);
        return m;
    }

    void validate(int N) const {
        for (std::size_t k = 0; k < elements.size(); ++k) {
            detail::require(elements[k] >= 1 && elements[k] <= N, "IndexSet: element out of range");
            detail::require(k == 0 || elements[k - 1] < elements[k], "IndexSet: elements must increase");
        }
    }

    friend bool operator==(const IndexSet&, const IndexSet&) = default;
};

/// Cover sizes rho^(-alpha_N N) by balls of radius C rho^N, for N = N0, N0+1, ...
struct CoverSchedule {
    double rho = 0.5;
    double C = 1.0;
    int N0 = 1;
    std::vector<double> alpha;
};

struct BlockCheck {
    bool holds = false;
    IndexSet J;
    int required = 0;
};

struct BinomialCheck {
    int k = 0;
    BigInt exact;
    double bound = 0.0;
    bool holds = false;
};

struct Interval {
    double center = 0.0;
    double radius = 0.0;
};

struct BoxCountFit {
    double slope = 0.0;
    std::vector<double> scales;
    std::vector<std::size_t> counts;
};

/// {0,1}-valued step function on [0, R_max]: value[k] on [breaks[k], breaks[k+1]),
/// with the last piece running to R_max. breaks[0] must be 0.
struct StepFunction {
    std::vector<double> breaks{0.0};
    std::vector<int> values{0};
    double R_max = 1.0;

    void validate() const {
        detail::require(!breaks.empty() && breaks.size() == values.size(), "StepFunction: breaks/values mismatch");
        detail::require(breaks.front() == 0.0, "StepFunction: first break must be 0");
        for (std::size_t k = 0; k < breaks.size(); ++k) {
            detail::require(values[k] == 0 || values[k] == 1, "StepFunction: values must be 0 or 1");
            detail::require(k == 0 || breaks[k - 1] < breaks[k], "StepFunction: breaks must increase");
        }
        detail::require(breaks.back() < R_max, "StepFunction: breaks must lie below R_max");
    }

    /// Integral of f over [0, R].
    double integral(double R) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < breaks.size(); ++k) {
            const double a = breaks[k];
            const double b = k + 1 < breaks.size() ? breaks[k + 1] : R_max;
            if (a >= R) break;
            acc += values[k] * (std::min(b, R) - a);
        }
        return acc;
    }
};

struct DiscretizationGap {
    double sup_real = 0.0;
    double sup_grid = 0.0;
    double slack = 0.0;
    bool holds = false;
};

namespace detail {

// ceil with a small absolute allowance so that products such as 0.3 * 10 that
// land a few ulps above an integer are not pushed to the next one
inline int tolerant_ceil(double x) {
    return static_cast<int>(std::ceil(x - 1e-9));
}

} // namespace detail

/// Least number of blocks whose average must reach epsilon when the overall
/// average over N blocks reaches delta: ceil((1 - (1-delta)/(1-epsilon)) N).
inline int min_high_blocks(double delta, double epsilon, int N) {
    detail::require(epsilon > 0.0 && epsilon < delta && delta <= 1.0, "min_high_blocks: need 0 < epsilon < delta <= 1");
    detail::require(N >= 1, "min_high_blocks: N must be positive");
    if (delta == 1.0) return N;
    return std::max(0, detail::tolerant_ceil(z_from_epsilon(epsilon, delta) * N));
}

inline BlockCheck check_block_decomposition(const BlockAverageVector& v, double delta, double epsilon) {
    detail::require(epsilon > 0.0 && epsilon < delta && delta <= 1.0, "check_block_decomposition: need 0 < epsilon < delta <= 1");
    if (v.N() == 0) throw PreconditionError("check_block_decomposition: empty vector");
    for (double x : v.a)
        if (!(x >= 0.0 && x <= 1.0)) throw PreconditionError("check_block_decomposition: entries must lie in [0,1]");
    if (v.mean() < delta) throw PreconditionError("check_block_decomposition: mean below delta");

    BlockCheck out;
    for (std::size_t i = 0; i < v.N(); ++i)
        if (v.a[i] >= epsilon) out.J.elements.push_back(static_cast<int>(i) + 1);
    out.required = min_high_blocks(delta, epsilon, static_cast<int>(v.N()));
    out.holds = static_cast<int>(out.J.size()) >= out.required;
    return out;
}

inline BigInt binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    BigInt acc = 1;
    for (int i = 1; i <= k; ++i) {
        acc *= n - k + i;
        acc /= i;
    }
    return acc;
}

/// C(N, k) against B(k/N)^N with k = ceil(zN). The decision is exact:
/// B(k/N)^N = N^N / (k^k (N-k)^(N-k)), so it compares integers only.
inline BinomialCheck binomial_vs_stirling(int N, double z) {
    detail::require(N >= 1, "binomial_vs_stirling: N must be positive");
    detail::require(z > 0.0 && z < 1.0, "binomial_vs_stirling: z must lie in (0,1)");
    BinomialCheck out;
    out.k = std::clamp(detail::tolerant_ceil(z * N), 0, N);
    out.exact = binomial(N, out.k);
    out.bound = std::pow(b_of_z(static_cast<double>(out.k) / N), N);

    using boost::multiprecision::pow;
    const BigInt lhs = out.exact * pow(BigInt(out.k), out.k) * pow(BigInt(N - out.k), N - out.k);
    out.holds = lhs <= pow(BigInt(N), N);
    return out;
}

/// Smallest N0 such that the entropy bound holds for every N in [N0, N_max].
inline int find_N0(double z, int N_max) {
    detail::require(N_max >= 1 && N_max <= 512, "find_N0: N_max must lie in [1, 512]");
    int N0 = N_max + 1;
    for (int N = N_max; N >= 1; --N) {
        if (!binomial_vs_stirling(N, z).holds) break;
        N0 = N;
    }
    return N0;
}

/// liminf of alpha_N estimated from a finite window: the minimum over the
/// second half of the window. Callers must supply a window long enough for
/// alpha_N to have settled.
inline double limsup_dim_bound(const CoverSchedule& cs) {
    if (cs.alpha.empty()) throw DomainError("limsup_dim_bound: empty schedule");
    detail::require(cs.rho > 0.0 && cs.rho < 1.0, "limsup_dim_bound: rho must lie in (0,1)");
    const std::size_t start = cs.alpha.size() / 2;
    return *std::min_element(cs.alpha.begin() + static_cast<std::ptrdiff_t>(start), cs.alpha.end());
}

/// Number of mesh cells [k eps, (k+1) eps) meeting the union of the open intervals.
inline std::size_t mesh_count(std::span<const Interval> set, double eps) {
    std::unordered_set<long long> cells;
    for (const Interval& iv : set) {
        const double a = iv.center - iv.radius, b = iv.center + iv.radius;
        long long lo = static_cast<long long>(std::floor(a / eps + 1e-9));
        long long hi = static_cast<long long>(std::ceil(b / eps - 1e-9)) - 1;
        hi = std::max(hi, lo);
        for (long long c = lo; c <= hi; ++c) cells.insert(c);
    }
    return cells.size();
}

/// Least-squares slope of ln(count) against ln(1/scale).
inline BoxCountFit box_count_dimension(std::span<const Interval> set, std::span<const double> scales) {
    detail::require(scales.size() >= 3, "box_count_dimension: need at least 3 scales");
    BoxCountFit fit;
    std::vector<double> xs, ys;
    for (double eps : scales) {
        detail::require(eps > 0.0, "box_count_dimension: scales must be positive");
        const std::size_t n = mesh_count(set, eps);
        fit.scales.push_back(eps);
        fit.counts.push_back(n);
        xs.push_back(-std::log(eps));
        ys.push_back(std::log(static_cast<double>(std::max<std::size_t>(n, 1))));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 1e-300) throw DomainError("box_count_dimension: degenerate fit (all scales equal)");
    fit.slope = sxy / sxx;
    return fit;
}

/// Level-n intervals of the middle-third Cantor set, as (center, radius).
inline std::vector<Interval> cantor_intervals(int level) {
    detail::require(level >= 0 && level <= 20, "cantor_intervals: level must lie in [0,20]");
    std::vector<double> left{0.0};
    double len = 1.0;
    for (int n = 0; n < level; ++n) {
        len /= 3.0;
        std::vector<double> next;
        next.reserve(2 * left.size());
        for (double a : left) {
            next.push_back(a);
            next.push_back(a + 2.0 * len);
        }
        left.swap(next);
    }
    std::vector<Interval> out;
    out.reserve(left.size());
    for (double a : left) out.push_back({a + 0.5 * len, 0.5 * len});
    return out;
}

/// Checks sup_{R in [N0 T, R_max]} F(R)/R <= max_{N0 <= N <= R_max/T} F(NT)/(NT) + 1/N0.
/// F(R)/R is monotone between breakpoints, so the real supremum is attained on
/// breakpoints, the grid points or the ends of the range.
inline DiscretizationGap discretization_gap(const StepFunction& f, double T, int N0) {
    f.validate();
    detail::require(T > 0.0 && N0 >= 1, "discretization_gap: need T > 0 and N0 >= 1");
    if (f.R_max < (N0 + 2) * T) throw DomainError("discretization_gap: R_max must be at least (N0+2) T");

    const double lo = N0 * T;
    auto ratio = [&](double R) { return f.integral(R) / R; };

    DiscretizationGap out;
    out.sup_real = std::max(ratio(lo), ratio(f.R_max));
    for (double b : f.breaks)
        if (b > lo && b < f.R_max) out.sup_real = std::max(out.sup_real, ratio(b));

    const int N_hi = static_cast<int>(std::floor(f.R_max / T + 1e-12));
    out.sup_grid = 0.0;
    for (int N = N0; N <= N_hi; ++N) {
        out.sup_real = std::max(out.sup_real, ratio(N * T));
        out.sup_grid = std::max(out.sup_grid, ratio(N * T));
    }
    out.slack = 1.0 / N0;
    out.holds = out.sup_real <= out.sup_grid + out.slack + 1e-12;
    return out;
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteTally {
    std::uint64_t instances = 0;
    std::uint64_t failures = 0;

    bool passed() const { return failures == 0; }

    SuiteTally& operator+=(const SuiteTally& o) {
        instances += o.instances;
        failures += o.failures;
        return *this;
    }
};

/// Random block vectors with mean >= delta: uniform draws pushed towards 1
/// when their mean falls short. Batches are independently seeded.
inline SuiteTally block_lemma_random(double delta, double epsilon, int N, std::uint64_t samples,
                                     std::uint64_t seed) {
    constexpr std::uint64_t kBatch = 4096;
    const std::uint64_t batches = (samples + kBatch - 1) / kBatch;
    std::vector<SuiteTally> per_chunk(chunk_count(batches));
    parallel_chunks(batches, [&](std::size_t chunk, std::size_t b0, std::size_t b1) {
        SuiteTally& tally = per_chunk[chunk];
        BlockAverageVector v;
        v.a.resize(static_cast<std::size_t>(N));
        for (std::size_t b = b0; b < b1; ++b) {
            SeededStream rng(seed, b);
            const std::uint64_t count = std::min<std::uint64_t>(kBatch, samples - b * kBatch);
            for (std::uint64_t s = 0; s < count; ++s) {
                for (double& x : v.a) x = rng.uniform();
                // occasionally snap entries to the extremes and to epsilon itself
                for (double& x : v.a) {
                    const double u = rng.uniform();
                    if (u < 0.1) x = 1.0;
                    else if (u < 0.15) x = 0.0;
                    else if (u < 0.2) x = epsilon;
                }
                double m = v.mean();
                if (m < delta) {
                    const double t = (delta - m) / (1.0 - m);
                    for (double& x : v.a) x = std::min(1.0, x + t * (1.0 - x));
                    m = v.mean();
                    if (m < delta)
                        for (double& x : v.a) x = std::min(1.0, x + 1e-12);
                    if (v.mean() < delta) std::fill(v.a.begin(), v.a.end(), 1.0);
                }
                ++tally.instances;
                if (!check_block_decomposition(v, delta, epsilon).holds) ++tally.failures;
            }
        }
    });
    SuiteTally total;
    for (const auto& t : per_chunk) total += t;
    return total;
}

/// Every {0, epsilon, 1}-valued vector of length N whose mean reaches delta.
inline SuiteTally block_lemma_exhaustive(double delta, double epsilon, int N) {
    detail::require(N >= 1 && N <= 12, "block_lemma_exhaustive: N must lie in [1,12]");
    const double levels[3] = {0.0, epsilon, 1.0};
    SuiteTally tally;
    BlockAverageVector v;
    v.a.resize(static_cast<std::size_t>(N));
    std::uint64_t total = 1;
    for (int i = 0; i < N; ++i) total *= 3;
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t c = code;
        for (int i = 0; i < N; ++i, c /= 3) v.a[static_cast<std::size_t>(i)] = levels[c % 3];
        if (v.mean() < delta) continue;
        ++tally.instances;
        if (!check_block_decomposition(v, delta, epsilon).holds) ++tally.failures;
    }
    return tally;
}

/// Random {0,1} step functions with breakpoints on [0, R_max).
inline SuiteTally discretization_random(std::uint64_t samples, std::uint64_t seed) {
    SuiteTally tally;
    SeededStream rng(seed, 0xd15c);
    for (std::uint64_t s = 0; s < samples; ++s) {
        const double T = rng.uniform(0.25, 4.0);
        const int N0 = 1 + static_cast<int>(rng.below(6));
        StepFunction f;
        f.R_max = (N0 + 2) * T + rng.uniform(0.0, 40.0);
        const int pieces = 1 + static_cast<int>(rng.below(40));
        std::vector<double> cuts;
        for (int p = 1; p < pieces; ++p) cuts.push_back(rng.uniform(0.0, f.R_max));
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        f.breaks = {0.0};
        for (double c : cuts)
            if (c > 0.0) f.breaks.push_back(c);
        f.values.resize(f.breaks.size());
        for (int& v : f.values) v = static_cast<int>(rng.below(2));
        ++tally.instances;
        if (!discretization_gap(f, T, N0).holds) ++tally.failures;
    }
    return tally;
}

} // namespace escape_dim

#pragma once

// Exhaustive checks of the covering machinery on the full one-sided binary
// shift with the uniform Bernoulli measure. A Bowen (t, r)-box here is a
// depth-t cylinder, so every count and every measure is an exact rational.
//
// Time is discrete: a Birkhoff average over [0, T) is a sum over t = 0..T-1.
// A target S of depth d is a set of length-d words; the indicator of S at
// time t reads symbols t..t+d-1, so a horizon of n steps needs n + d - 1 symbols.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include "covering_combinatorics.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace escape_dim {

using Rational = boost::rational<std::int64_t>;
using BigRational = boost::multiprecision::cpp_rational;

inline constexpr int kMaxWordLength = 30;

/// Finite 0/1 word; symbol i is bit i of `bits`.
struct SymbolWord {
    std::uint32_t bits = 0;
    int length = 0;

    int at(int i) const { return static_cast<int>(bits >> i & 1u); }

    static SymbolWord from_string(const std::string& s) {
        if (s.size() > static_cast<std::size_t>(kMaxWordLength))
            throw BudgetError("SymbolWord: length exceeds 30");
        SymbolWord w;
        w.length = static_cast<int>(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            detail::require(s[i] == '0' || s[i] == '1', "SymbolWord: symbols must be 0 or 1");
            if (s[i] == '1') w.bits |= 1u << i;
        }
        return w;
    }

    std::string to_string() const {
        std::string s(static_cast<std::size_t>(length), '0');
        for (int i = 0; i < length; ++i)
            if (at(i)) s[static_cast<std::size_t>(i)] = '1';
        return s;
    }

    friend bool operator==(const SymbolWord&, const SymbolWord&) = default;
    friend auto operator<=>(const SymbolWord&, const SymbolWord&) = default;
};

/// Union of depth-d cylinders, playing the complement of the open set.
class CylinderTarget {
public:
    CylinderTarget() : CylinderTarget(1, {}) {}

    CylinderTarget(int depth, std::vector<std::uint32_t> words) : depth_(depth), words_(std::move(words)) {
        detail::require(depth_ >= 1 && depth_ <= 16, "CylinderTarget: depth must lie in [1,16]");
        std::sort(words_.begin(), words_.end());
        words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
        table_.assign(std::size_t{1} << depth_, 0);
        for (std::uint32_t w : words_) {
            detail::require(w < (1u << depth_), "CylinderTarget: word longer than depth");
            table_[w] = 1;
        }
    }

    static CylinderTarget from_strings(const std::vector<std::string>& words) {
        detail::require(!words.empty(), "CylinderTarget: need at least one word to fix the depth");
        const int d = static_cast<int>(words.front().size());
        std::vector<std::uint32_t> codes;
        for (const auto& s : words) {
            detail::require(static_cast<int>(s.size()) == d, "CylinderTarget: all words must share one length");
            codes.push_back(SymbolWord::from_string(s).bits);
        }
        return {d, std::move(codes)};
    }

    /// All 2^(2^d) targets of depth d, in order of their subset code.
    static std::vector<CylinderTarget> all_of_depth(int d) {
        detail::require(d >= 1 && d <= 3, "all_of_depth: d must lie in [1,3]");
        const std::uint32_t patterns = 1u << d;
        std::vector<CylinderTarget> out;
        for (std::uint64_t code = 0; code < (std::uint64_t{1} << patterns); ++code) {
            std::vector<std::uint32_t> ws;
            for (std::uint32_t p = 0; p < patterns; ++p)
                if (code >> p & 1u) ws.push_back(p);
            out.emplace_back(d, std::move(ws));
        }
        return out;
    }

    int depth() const { return depth_; }
    const std::vector<std::uint32_t>& words() const { return words_; }
    bool contains(std::uint32_t window) const { return table_[window] != 0; }

    Rational measure() const {
        return {static_cast<std::int64_t>(words_.size()), std::int64_t{1} << depth_};
    }

    /// Bitmask of times t in [0, horizon) at which the window of w starting at t lies in S.
    std::uint32_t hit_mask(std::uint32_t w, int horizon) const {
        std::uint32_t hits = 0;
        const std::uint32_t span = horizon >= 32 ? ~0u : (1u << horizon) - 1u;
        for (std::uint32_t p : words_) {
            std::uint32_t m = span;
            for (int j = 0; j < depth_; ++j) m &= (p >> j & 1u) ? (w >> j) : ~(w >> j);
            hits |= m;
        }
        return hits & span;
    }

    std::string describe() const {
        std::string s = "{";
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (i) s += ",";
            s += SymbolWord{words_[i], depth_}.to_string();
        }
        return s + "}";
    }

private:
    int depth_;
    std::vector<std::uint32_t> words_;
    std::vector<std::uint8_t> table_;
};

/// Reads a target: one length-d word per line; blank lines and '#' comments are skipped.
inline CylinderTarget parse_targets(std::istream& in) {
    std::vector<std::string> words;
    std::string line;
    int depth = -1;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string token;
        std::istringstream ls(line);
        if (!(ls >> token)) continue;
        if (depth < 0) depth = static_cast<int>(token.size());
        detail::require(static_cast<int>(token.size()) == depth, "parse_targets: inconsistent word length");
        words.push_back(token);
    }
    detail::require(!words.empty(), "parse_targets: no words");
    return CylinderTarget::from_strings(words);
}

struct ShiftCoverReport {
    int N = 0;
    int T = 0;
    std::optional<Rational> delta;
    Rational epsilon{0};
    std::optional<IndexSet> J;
    std::string target;
    std::uint64_t exact_count = 0;
    double bound = 0.0;
    double ratio = 0.0;
    bool verified = false;
};

namespace detail {

inline void check_budget(int symbols) {
    if (symbols > kMaxWordLength) throw BudgetError("word length " + std::to_string(symbols) + " exceeds budget 30");
}

/// Smallest integer c with c >= q * T.
inline int rational_ceil_times(const Rational& q, int T) {
    const std::int64_t num = q.numerator() * T, den = q.denominator();
    return static_cast<int>(num >= 0 ? (num + den - 1) / den : -((-num) / den));
}

inline std::uint32_t block_mask(int i, int T) {
    // times [(i-1) T, i T)
    const std::uint32_t len = (T >= 32) ? ~0u : (1u << T) - 1u;
    return len << ((i - 1) * T);
}

inline BigRational to_big(const Rational& q) {
    return BigRational(BigInt(q.numerator()), BigInt(q.denominator()));
}

inline void finish_report(ShiftCoverReport& rep, const BigRational& bound) {
    rep.bound = static_cast<double>(bound);
    rep.ratio = static_cast<double>(BigRational(BigInt(rep.exact_count)) / bound);
    rep.verified = BigRational(BigInt(rep.exact_count)) <= bound;
}

/// Exact-equidistribution stand-in for C(T, O): mu(S) + d / T.
inline Rational model_constant(const CylinderTarget& S, int T) {
    return S.measure() + Rational(S.depth(), T);
}

inline int bowen_blocks(const Rational& delta, const Rational& epsilon, int N) {
    if (delta == Rational(1)) return N;
    const Rational z = Rational(1) - (Rational(1) - delta) / (Rational(1) - epsilon);
    return std::clamp(rational_ceil_times(z, N), 0, N);
}

} // namespace detail

/// Average of 1_S(shift^t w) over t in [(i-1) T, i T).
inline Rational block_average(const SymbolWord& w, const CylinderTarget& S, int T, int i) {
    detail::require(T >= 1 && i >= 1, "block_average: need T >= 1 and i >= 1");
    if (w.length < i * T + S.depth() - 1) throw DomainError("block_average: word too short");
    int hits = 0;
    const std::uint32_t mask = (S.depth() >= 32) ? ~0u : (1u << S.depth()) - 1u;
    for (int t = (i - 1) * T; t < i * T; ++t)
        hits += S.contains((w.bits >> t) & mask) ? 1 : 0;
    return {hits, T};
}

/// All words of length N T + d - 1 whose average over [0, N T) reaches delta.
inline std::vector<SymbolWord> enumerate_A(int N, int T, const Rational& delta, const CylinderTarget& S) {
    detail::require(N >= 1 && T >= 1, "enumerate_A: need N, T >= 1");
    detail::require(delta > Rational(0) && delta <= Rational(1), "enumerate_A: delta must lie in (0,1]");
    const int horizon = N * T;
    const int n = horizon + S.depth() - 1;
    detail::check_budget(n);
    const int need = detail::rational_ceil_times(delta, horizon);
    std::vector<SymbolWord> out;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w) {
        const auto code = static_cast<std::uint32_t>(w);
        if (std::popcount(S.hit_mask(code, horizon)) >= need) out.push_back({code, n});
    }
    return out;
}

/// All words of length N T + d - 1 whose i-th block average reaches epsilon for every i in J.
inline std::vector<SymbolWord> enumerate_A_J(int T, const Rational& epsilon, const CylinderTarget& S,
                                             const IndexSet& J, int N) {
    detail::require(N >= 1 && T >= 1, "enumerate_A_J: need N, T >= 1");
    detail::require(epsilon > Rational(0) && epsilon <= Rational(1), "enumerate_A_J: epsilon must lie in (0,1]");
    J.validate(N);
    const int horizon = N * T;
    const int n = horizon + S.depth() - 1;
    detail::check_budget(n);
    const int need = detail::rational_ceil_times(epsilon, T);
    std::vector<SymbolWord> out;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w) {
        const auto code = static_cast<std::uint32_t>(w);
        const std::uint32_t hits = S.hit_mask(code, horizon);
        bool ok = true;
        for (int i : J.elements)
            if (std::popcount(hits & detail::block_mask(i, T)) < need) {
                ok = false;
                break;
            }
        if (ok) out.push_back({code, n});
    }
    return out;
}

/// Number of depth-`depth` cylinders (distinct prefixes) meeting a set of words.
inline std::uint64_t cylinder_count(const std::vector<SymbolWord>& words, int depth) {
    const std::uint32_t mask = depth >= 32 ? ~0u : (1u << depth) - 1u;
    std::vector<std::uint32_t> prefixes;
    prefixes.reserve(words.size());
    for (const auto& w : words) prefixes.push_back(w.bits & mask);
    std::sort(prefixes.begin(), prefixes.end());
    return static_cast<std::uint64_t>(std::unique(prefixes.begin(), prefixes.end()) - prefixes.begin());
}

/// Depth-NT cylinders meeting A_J against 2^{NT} (C_model / epsilon)^{|J|}.
inline ShiftCoverReport verify_uppcov(int N, int T, const Rational& epsilon, const CylinderTarget& S,
                                      const IndexSet& J) {
    detail::require(epsilon > Rational(0) && epsilon < Rational(1), "verify_uppcov: epsilon must lie in (0,1)");
    ShiftCoverReport rep;
    rep.N = N;
    rep.T = T;
    rep.epsilon = epsilon;
    rep.J = J;
    rep.target = S.describe();
    rep.exact_count = cylinder_count(enumerate_A_J(T, epsilon, S, J, N), N * T);

    using boost::multiprecision::pow;
    const BigRational per_block = detail::to_big(detail::model_constant(S, T)) / detail::to_big(epsilon);
    BigRational bound = BigRational(pow(BigInt(2), N * T));
    for (std::size_t j = 0; j < J.size(); ++j) bound *= per_block;
    detail::finish_report(rep, bound);
    return rep;
}

/// Depth-NT cylinders meeting A_delta(NT) against
/// C1 2^{NT} C(N, k) (C_model / epsilon)^k with k = ceil(z N).
inline ShiftCoverReport verify_bowen_ball(int N, int T, const Rational& delta, const Rational& epsilon,
                                          const CylinderTarget& S) {
    const bool surrogate = delta == Rational(1) && epsilon == Rational(1);
    detail::require(epsilon > Rational(0) && (epsilon < delta || surrogate) && delta <= Rational(1),
                    "verify_bowen_ball: need 0 < epsilon < delta <= 1");
    ShiftCoverReport rep;
    rep.N = N;
    rep.T = T;
    rep.delta = delta;
    rep.epsilon = epsilon;
    rep.target = S.describe();
    rep.exact_count = cylinder_count(enumerate_A(N, T, delta, S), N * T);

    using boost::multiprecision::pow;
    const int k = detail::bowen_blocks(delta, epsilon, N);
    const BigRational per_block = detail::to_big(detail::model_constant(S, T)) / detail::to_big(epsilon);
    BigRational bound = BigRational(pow(BigInt(2), N * T) * binomial(N, k));
    for (int j = 0; j < k; ++j) bound *= per_block;
    detail::finish_report(rep, bound);
    return rep;
}

/// nu(A_epsilon(T, S)) <= mu(S) / epsilon, exactly.
inline bool verify_markov(int T, const Rational& epsilon, const CylinderTarget& S) {
    detail::require(T >= 1, "verify_markov: T must be positive");
    detail::require(epsilon > Rational(0) && epsilon <= Rational(1), "verify_markov: epsilon must lie in (0,1]");
    const int n = T + S.depth() - 1;
    detail::check_budget(n);
    const int need = detail::rational_ceil_times(epsilon, T);
    std::int64_t count = 0;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w)
        if (std::popcount(S.hit_mask(static_cast<std::uint32_t>(w), T)) >= need) ++count;
    const Rational nu(count, std::int64_t{1} << n);
    return nu <= S.measure() / epsilon;
}

/// Cylinders of depth T + d - 1 are level sets of the time-T averages. Any such
/// cylinder whose average of 1_{S^c} reaches 1 - alpha has average of 1_S at
/// most alpha < epsilon, so it misses A_epsilon(T, S).
inline SuiteTally verify_disjoint_boxes(int T, const Rational& alpha, const Rational& epsilon,
                                        const CylinderTarget& S) {
    detail::require(alpha > Rational(0) && alpha < epsilon && epsilon < Rational(1),
                    "verify_disjoint_boxes: need 0 < alpha < epsilon < 1");
    const int n = T + S.depth() - 1;
    detail::check_budget(n);
    const int need_in_O = detail::rational_ceil_times(Rational(1) - alpha, T);
    const int need_in_S = detail::rational_ceil_times(epsilon, T);
    SuiteTally tally;
    for (std::uint64_t w = 0; w < (std::uint64_t{1} << n); ++w) {
        const int in_S = std::popcount(S.hit_mask(static_cast<std::uint32_t>(w), T));
        if (T - in_S < need_in_O) continue;
        ++tally.instances;
        if (in_S >= need_in_S) ++tally.failures;
    }
    return tally;
}

// ---------------------------------------------------------------------------
// Exhaustive sweep

struct ShiftSweepConfig {
    int max_N = 5;
    int max_T = 4;
    int max_NT = 20;
    std::vector<CylinderTarget> targets;
    std::vector<Rational> deltas;
    std::vector<Rational> epsilons;
};

/// One (N, T, target) cell of the sweep.
struct ShiftSweepCell {
    int N = 0;
    int T = 0;
    std::string target;
    std::uint64_t uppcov_instances = 0;
    std::uint64_t uppcov_failures = 0;
    double uppcov_max_ratio = 0.0;
    std::uint64_t bowen_instances = 0;
    std::uint64_t bowen_failures = 0;
    double bowen_max_ratio = 0.0;
};

struct ShiftSweepResult {
    std::vector<ShiftSweepCell> cells;
    SuiteTally uppcov;
    SuiteTally bowen;
    SuiteTally markov;

    bool passed() const { return uppcov.passed() && bowen.passed() && markov.passed(); }
};

/// Default sweep: depth <= 2 targets and a 4 x 4 rational (delta, epsilon) grid.
inline ShiftSweepConfig default_shift_sweep(int max_N = 5, int max_T = 4, int max_NT = 20) {
    ShiftSweepConfig cfg;
    cfg.max_N = max_N;
    cfg.max_T = max_T;
    cfg.max_NT = max_NT;
    for (int d = 1; d <= 2; ++d)
        for (auto& t : CylinderTarget::all_of_depth(d)) cfg.targets.push_back(std::move(t));
    cfg.deltas = {Rational(2, 5), Rational(1, 2), Rational(3, 4), Rational(1)};
    cfg.epsilons = {Rational(1, 5), Rational(1, 4), Rational(1, 3), Rational(1, 2)};
    return cfg;
}

namespace detail {

/// Single pass over all words of one (N, T, S) cell. For every prefix of
/// length NT it records which index sets J are met by some extension (per
/// epsilon) and the best total hit count over extensions.
struct CellCounts {
    std::vector<std::vector<std::uint64_t>> per_J;  // [epsilon][J mask]
    std::vector<std::uint64_t> total_hist;           // [hits over NT]
};

inline CellCounts count_cell(int N, int T, const CylinderTarget& S, const std::vector<Rational>& epsilons) {
    const int horizon = N * T;
    const int ext_bits = S.depth() - 1;
    check_budget(horizon + ext_bits);
    detail::require(N <= 5, "count_cell: N must be at most 5");
    const std::uint32_t subsets = 1u << N;

    // down[m]: bitset over J of all J contained in m
    std::vector<std::uint32_t> down(subsets, 0);
    for (std::uint32_t m = 0; m < subsets; ++m)
        for (std::uint32_t J = 0; J < subsets; ++J)
            if ((J & m) == J) down[m] |= 1u << J;

    std::vector<int> need;
    for (const auto& e : epsilons) need.push_back(rational_ceil_times(e, T));
    std::vector<std::uint32_t> blocks;
    for (int i = 1; i <= N; ++i) blocks.push_back(block_mask(i, T));

    const std::uint64_t prefixes = std::uint64_t{1} << horizon;
    const std::size_t chunks = chunk_count(prefixes);
    std::vector<CellCounts> partial(chunks);
    parallel_chunks(prefixes, [&](std::size_t chunk, std::size_t p0, std::size_t p1) {
        CellCounts& acc = partial[chunk];
        acc.per_J.assign(epsilons.size(), std::vector<std::uint64_t>(subsets, 0));
        acc.total_hist.assign(static_cast<std::size_t>(horizon) + 1, 0);
        std::vector<std::uint32_t> reach(epsilons.size());
        std::array<int, 32> counts{};
        for (std::size_t p = p0; p < p1; ++p) {
            std::fill(reach.begin(), reach.end(), 0u);
            int best_total = 0;
            for (std::uint32_t e = 0; e < (1u << ext_bits); ++e) {
                const auto w = static_cast<std::uint32_t>(p) | (e << horizon);
                const std::uint32_t hits = S.hit_mask(w, horizon);
                best_total = std::max(best_total, std::popcount(hits));
                for (int i = 0; i < N; ++i) counts[static_cast<std::size_t>(i)] = std::popcount(hits & blocks[static_cast<std::size_t>(i)]);
                for (std::size_t k = 0; k < epsilons.size(); ++k) {
                    std::uint32_t m = 0;
                    for (int i = 0; i < N; ++i)
                        if (counts[static_cast<std::size_t>(i)] >= need[k]) m |= 1u << i;
                    reach[k] |= down[m];
                }
            }
            ++acc.total_hist[static_cast<std::size_t>(best_total)];
            for (std::size_t k = 0; k < epsilons.size(); ++k)
                for (std::uint32_t r = reach[k]; r; r &= r - 1) ++acc.per_J[k][static_cast<std::size_t>(std::countr_zero(r))];
        }
    });

    CellCounts out;
    out.per_J.assign(epsilons.size(), std::vector<std::uint64_t>(subsets, 0));
    out.total_hist.assign(static_cast<std::size_t>(horizon) + 1, 0);
    for (const auto& part : partial) {
        if (part.per_J.empty()) continue;
        for (std::size_t k = 0; k < epsilons.size(); ++k)
            for (std::uint32_t J = 0; J < subsets; ++J) out.per_J[k][J] += part.per_J[k][J];
        for (std::size_t c = 0; c < out.total_hist.size(); ++c) out.total_hist[c] += part.total_hist[c];
    }
    return out;
}

} // namespace detail

/// Counting route for the whole sweep. Agrees with verify_uppcov /
/// verify_bowen_ball instance by instance; it only avoids re-enumerating words.
inline ShiftSweepResult run_shift_sweep(const ShiftSweepConfig& cfg) {
    using boost::multiprecision::pow;
    ShiftSweepResult res;
    for (int N = 1; N <= cfg.max_N; ++N) {
        for (int T = 1; T <= cfg.max_T; ++T) {
            if (N * T > cfg.max_NT) continue;
            for (const auto& S : cfg.targets) {
                if (N * T + S.depth() - 1 > kMaxWordLength) continue;
                const auto counts = detail::count_cell(N, T, S, cfg.epsilons);
                ShiftSweepCell cell;
                cell.N = N;
                cell.T = T;
                cell.target = S.describe();
                const BigRational C = detail::to_big(detail::model_constant(S, T));
                const BigRational full = BigRational(pow(BigInt(2), N * T));

                for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
                    const Rational& eps = cfg.epsilons[k];
                    if (!(eps < Rational(1))) continue;
                    const BigRational per_block = C / detail::to_big(eps);
                    for (std::uint32_t J = 0; J < (1u << N); ++J) {
                        BigRational bound = full;
                        for (int j = 0; j < std::popcount(J); ++j) bound *= per_block;
                        const BigRational exact(BigInt(counts.per_J[k][J]));
                        ++cell.uppcov_instances;
                        if (exact > bound) ++cell.uppcov_failures;
                        cell.uppcov_max_ratio = std::max(cell.uppcov_max_ratio, static_cast<double>(exact / bound));
                    }
                    for (const Rational& delta : cfg.deltas) {
                        if (!(eps < delta)) continue;
                        const int need = detail::rational_ceil_times(delta, N * T);
                        std::uint64_t exact_count = 0;
                        for (std::size_t c = static_cast<std::size_t>(std::max(need, 0)); c < counts.total_hist.size(); ++c)
                            exact_count += counts.total_hist[c];
                        const int kb = detail::bowen_blocks(delta, eps, N);
                        BigRational bound = full * BigRational(binomial(N, kb));
                        for (int j = 0; j < kb; ++j) bound *= per_block;
                        const BigRational exact{BigInt(exact_count)};
                        ++cell.bowen_instances;
                        if (exact > bound) ++cell.bowen_failures;
                        cell.bowen_max_ratio = std::max(cell.bowen_max_ratio, static_cast<double>(exact / bound));
                    }
                }
                res.uppcov.instances += cell.uppcov_instances;
                res.uppcov.failures += cell.uppcov_failures;
                res.bowen.instances += cell.bowen_instances;
                res.bowen.failures += cell.bowen_failures;
                res.cells.push_back(std::move(cell));
            }
        }
    }
    // Markov step on every horizon up to max_NT, each target and epsilon
    for (int T = 1; T <= cfg.max_NT; ++T)
        for (const auto& S : cfg.targets) {
            if (T + S.depth() - 1 > kMaxWordLength) continue;
            for (const auto& eps : cfg.epsilons) {
                ++res.markov.instances;
                if (!verify_markov(T, eps, S)) ++res.markov.failures;
            }
        }
    return res;
}

} // namespace escape_dim

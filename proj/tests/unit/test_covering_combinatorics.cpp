#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "escape_dim/covering_combinatorics.hpp"

using namespace escape_dim;
using Catch::Matchers::WithinAbs;

namespace {

// Counting oracle: k high entries give a sum below k + (N - k) epsilon,
// so the lemma needs k (1 - epsilon) >= (delta - epsilon) N.
bool counting_oracle(const std::vector<double>& a, double delta, double epsilon) {
    const int N = static_cast<int>(a.size());
    int k = 0;
    for (double x : a)
        if (x >= epsilon) ++k;
    return k * (1.0 - epsilon) >= (delta - epsilon) * N - 1e-9;
}

} // namespace

TEST_CASE("min_high_blocks", "[block]") {
    CHECK(min_high_blocks(0.9, 0.5, 10) == 8);
    CHECK(min_high_blocks(1.0, 0.5, 7) == 7);
    CHECK(min_high_blocks(0.5, 0.25, 4) == 2);
    CHECK_THROWS_AS(min_high_blocks(0.5, 0.6, 4), DomainError);
}

TEST_CASE("block decomposition on hand-made vectors", "[block]") {
    const BlockAverageVector v{{1.0, 1.0, 0.0, 1.0}};
    const auto c = check_block_decomposition(v, 0.75, 0.5);
    CHECK(c.holds);
    CHECK(c.J.elements == std::vector<int>{1, 2, 4});
    CHECK(c.required == min_high_blocks(0.75, 0.5, 4));

    // entries equal to epsilon count as high
    const BlockAverageVector tie{{0.5, 1.0}};
    CHECK(check_block_decomposition(tie, 0.75, 0.5).J.size() == 2);

    const BlockAverageVector low{{0.1, 0.1}};
    CHECK_THROWS_AS(check_block_decomposition(low, 0.5, 0.25), PreconditionError);
}

TEST_CASE("block decomposition agrees with the counting oracle", "[block]") {
    SeededStream rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const int N = 1 + static_cast<int>(rng.below(12));
        const double delta = rng.uniform(0.2, 0.99);
        const double eps = delta * rng.uniform(0.05, 0.95);
        std::vector<double> a(static_cast<std::size_t>(N));
        for (auto& x : a) x = rng.uniform() < 0.3 ? 1.0 : rng.uniform();
        double m = 0;
        for (double x : a) m += x;
        m /= N;
        if (m < delta) continue;
        const auto c = check_block_decomposition({a}, delta, eps);
        CHECK(c.holds == counting_oracle(a, delta, eps));
        CHECK(c.holds);
    }
}

TEST_CASE("block lemma suites", "[block]") {
    for (double delta : {0.5, 0.9, 1.0})
        for (double f : {0.2, 0.6}) {
            const auto ex = block_lemma_exhaustive(delta, f * delta, 7);
            CHECK(ex.instances > 0);
            CHECK(ex.passed());
            const auto rnd = block_lemma_random(delta, f * delta, 10, 5000, 3);
            CHECK(rnd.instances == 5000);
            CHECK(rnd.passed());
        }
    const auto a = block_lemma_random(0.7, 0.3, 9, 3000, 42);
    const auto b = block_lemma_random(0.7, 0.3, 9, 3000, 42);
    CHECK(a.instances == b.instances);
    CHECK(a.failures == b.failures);
}

TEST_CASE("binomial coefficients", "[binomial]") {
    CHECK(binomial(20, 10) == BigInt(184756));
    CHECK(binomial(5, 0) == BigInt(1));
    CHECK(binomial(5, 6) == BigInt(0));
    BigInt sum = 0;
    for (int k = 0; k <= 20; ++k) sum += binomial(20, k);
    CHECK(sum == BigInt(1048576));
}

TEST_CASE("binomial against its entropy bound", "[binomial]") {
    for (int N = 1; N <= 64; ++N)
        for (int i = 1; i <= 19; ++i) {
            const auto c = binomial_vs_stirling(N, i / 20.0);
            CHECK(c.holds);
            CHECK(static_cast<double>(c.exact) <= c.bound * (1.0 + 1e-9));
        }
    const auto half = binomial_vs_stirling(20, 0.5);
    CHECK(half.k == 10);
    CHECK(half.exact == BigInt(184756));
    CHECK_THAT(half.bound, WithinAbs(1048576.0, 1e-6));
    CHECK(find_N0(0.3, 128) == 1);
}

TEST_CASE("limsup bound and Cantor box counting", "[limsup]") {
    CoverSchedule cs;
    cs.rho = 1.0 / 3.0;
    cs.C = 0.5;
    for (int n = 1; n <= 16; ++n) cs.alpha.push_back(n * std::log(2.0) / (n * std::log(3.0)));
    const double target = std::log(2.0) / std::log(3.0);
    CHECK_THAT(limsup_dim_bound(cs), WithinAbs(target, 1e-14));

    const auto set = cantor_intervals(14);
    CHECK(set.size() == 16384);
    std::vector<double> scales;
    for (int k = 2; k <= 12; ++k) scales.push_back(std::pow(3.0, -k));
    const auto fit = box_count_dimension(set, scales);
    CHECK_THAT(fit.slope, WithinAbs(target, 0.02));
    CHECK(fit.slope <= limsup_dim_bound(cs) + 0.03);

    CHECK_THROWS_AS(limsup_dim_bound(CoverSchedule{}), DomainError);
}

TEST_CASE("box counting of simple sets", "[limsup]") {
    const std::vector<Interval> unit{{0.5, 0.5}};
    std::vector<double> scales{0.1, 0.01, 0.001, 0.0001};
    CHECK_THAT(box_count_dimension(unit, scales).slope, WithinAbs(1.0, 0.01));
    const std::vector<Interval> point{{0.123456, 1e-12}};
    CHECK_THAT(box_count_dimension(point, scales).slope, WithinAbs(0.0, 0.05));
}

TEST_CASE("discretisation gap", "[discretization]") {
    StepFunction f;
    f.breaks = {0.0, 3.0, 7.5};
    f.values = {1, 0, 1};
    f.R_max = 20.0;
    const auto g = discretization_gap(f, 2.0, 2);
    CHECK(g.holds);
    CHECK(g.sup_real >= g.sup_grid);
    CHECK(discretization_random(2000, 5).passed());
    f.R_max = 5.0;
    CHECK_THROWS_AS(discretization_gap(f, 2.0, 2), DomainError);
}

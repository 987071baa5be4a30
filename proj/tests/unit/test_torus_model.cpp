#include "catch_amalgamated.hpp"

#include <cmath>

#include "escape_dim/torus_model.hpp"

using namespace escape_dim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RectUnion random_union(SeededStream& rng, int count) {
    RectUnion U;
    for (int i = 0; i < count; ++i)
        U.rects.push_back(Rect::make(rng.uniform(), rng.uniform(), rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)));
    return U;
}

} // namespace

TEST_CASE("eigen data of hyperbolic matrices", "[torus]") {
    const auto cat = cat_map();
    CHECK_THAT(cat.lambda_u, WithinRel(2.61803398875, 1e-11));
    CHECK_THAT(cat.log_lambda(), WithinRel(0.962423650119, 1e-11));
    CHECK(cat.eigenvalue > 0.0);
    CHECK_THAT(std::hypot(cat.u_dir.x, cat.u_dir.y), WithinAbs(1.0, 1e-15));
    CHECK_THAT(2 * cat.u_dir.x + cat.u_dir.y, WithinAbs(cat.lambda_u * cat.u_dir.x, 1e-12));

    const auto other = eigen_data({{{1, 1}, {1, 2}}});
    CHECK_THAT(other.lambda_u, WithinRel(2.61803398875, 1e-11));

    const auto flip = eigen_data({{{-2, -1}, {-1, -1}}});
    CHECK(flip.eigenvalue < 0.0);
    CHECK_THAT(flip.lambda_u, WithinRel(2.61803398875, 1e-11));

    CHECK_THROWS_AS(eigen_data({{{1, 1}, {0, 1}}}), DomainError);
    CHECK_THROWS_AS(eigen_data({{{2, 0}, {0, 1}}}), DomainError);
}

TEST_CASE("torus points map exactly", "[torus]") {
    const auto p = TorusPoint::from_double(0.5, 0.25);
    const auto q = map_point(cat_map().m, p);
    CHECK(q.xd() == 0.25);
    CHECK(q.yd() == 0.75);
    CHECK(TorusPoint::from_double(-0.25, 1.75) == TorusPoint::from_double(0.75, 0.75));
}

TEST_CASE("unstable orbit follows the displaced point", "[torus]") {
    const auto hm = cat_map();
    const auto x = TorusPoint::from_double(0.3, 0.6);
    const UnstableOrbit orbit(hm, x, 12);
    const double h = 1e-6;
    const double px = 0.3 + h * hm.u_dir.x, py = 0.6 + h * hm.u_dir.y;
    // iterate the displaced point directly in long double
    long double ax = px, ay = py;
    for (int t = 0; t < 12; ++t) {
        const Vec2 v = orbit.at(t, h);
        CHECK_THAT(v.x, WithinAbs(static_cast<double>(ax - std::floor(ax)), 1e-9));
        CHECK_THAT(v.y, WithinAbs(static_cast<double>(ay - std::floor(ay)), 1e-9));
        const long double nx = 2 * ax + ay, ny = ax + ay;
        ax = nx - std::floor(nx);
        ay = ny - std::floor(ny);
    }
}

TEST_CASE("rectangles are open and wrap around", "[torus][rect]") {
    const auto r = Rect::make(0.9, 0.0, 0.2, 1.0);
    CHECK(r.contains(0.95, 0.5));
    CHECK(r.contains(0.05, 0.0));
    CHECK_FALSE(r.contains(0.9, 0.5));
    CHECK_FALSE(r.contains(0.5, 0.5));
    CHECK(RectUnion::full().measure() == 1.0);
    CHECK(RectUnion::empty().measure() == 0.0);
    CHECK_THAT(RectUnion::complement_of_square(0.0, 0.0, 0.1).measure(), WithinAbs(0.96, 1e-12));
}

TEST_CASE("union measure counts overlaps once", "[torus][rect]") {
    RectUnion U{{Rect::make(0.0, 0.0, 0.5, 0.5), Rect::make(0.25, 0.25, 0.5, 0.5)}};
    CHECK_THAT(U.measure(), WithinAbs(0.4375, 1e-12));
    RectUnion wrap{{Rect::make(0.8, 0.8, 0.4, 0.4)}};
    CHECK_THAT(wrap.measure(), WithinAbs(0.16, 1e-12));
}

TEST_CASE("inner core of a rectangle", "[torus][core]") {
    const auto sq = Rect::make(0.1, 0.1, 0.3, 0.3);
    CHECK_THAT(sq.area(), WithinAbs(0.09, 1e-15));
    const auto core = sigma_core(sq, 0.05);
    REQUIRE(core.rects.size() == 1);
    CHECK_THAT(core.measure(), WithinAbs(0.04, 1e-12));
    CHECK(sigma_core(sq, 0.15).rects.empty());
    CHECK(sigma_core(sq, 0.2).measure() == 0.0);

    const auto band = Rect::make(0.0, 0.2, 1.0, 0.4);
    CHECK_THAT(sigma_core(band, 0.1).measure(), WithinAbs(0.2, 1e-12));
}

TEST_CASE("inner core of a union merges touching pieces", "[torus][core]") {
    // two halves of a band share an edge; the core is not the union of the cores
    RectUnion U{{Rect::make(0.0, 0.2, 0.5, 0.4), Rect::make(0.5, 0.2, 0.5, 0.4)}};
    CHECK_THAT(sigma_core(U, 0.1).measure(), WithinAbs(0.2, 1e-12));
    CHECK_THAT(sigma_core(RectUnion::complement_of_square(0.0, 0.0, 0.1), 0.05).measure(),
               WithinAbs(1.0 - 0.3 * 0.3, 1e-12));
}

TEST_CASE("exact and grid cores agree", "[torus][core]") {
    SeededStream rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const auto U = random_union(rng, 1 + trial % 4);
        for (double r : {0.01, 0.03}) {
            const auto grid = sigma_core_grid(U, r, 1024);
            const double exact = sigma_core(U, r).measure();
            CHECK(std::abs(exact - grid.measure) <= grid.error + 4.0 / 1024);
            const auto nb = neighborhood_grid(U, r, 1024);
            CHECK(std::abs(neighborhood(U, r).measure() - nb.measure) <= nb.error + 4.0 / 1024);
        }
    }
    CHECK_THROWS_AS(sigma_core_grid(RectUnion::full(), 0.01, 100), DomainError);
}

TEST_CASE("core of the neighbourhood contains the set", "[torus][core]") {
    SeededStream rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const auto U = random_union(rng, 3);
        const double r = 0.02;
        const auto back = sigma_core(neighborhood(U, r), r);
        const auto a = GridMask::rasterize(U, 512);
        const auto b = GridMask::rasterize(back, 512);
        CHECK(a.subset_of(b));
        CHECK(GridMask::rasterize(sigma_core(U, r), 512).subset_of(a));
    }
}

TEST_CASE("neighbourhoods grow with the radius", "[torus][core]") {
    SeededStream rng(99);
    const auto U = random_union(rng, 3);
    double prev = U.measure();
    for (double r : {0.001, 0.01, 0.05, 0.1, 0.3}) {
        const double m = neighborhood(U, r).measure();
        CHECK(m >= prev - 1e-12);
        prev = m;
    }
}

TEST_CASE("grid morphology", "[torus][grid]") {
    const auto m = GridMask::rasterize(RectUnion{{Rect::make(0.25, 0.25, 0.5, 0.5)}}, 16);
    CHECK(m.measure() == 0.25);
    CHECK(m.eroded(2).measure() == 0.0625);
    CHECK(m.dilated(2).measure() == 0.5625);
    CHECK(m.eroded(1).subset_of(m));
    CHECK(m.subset_of(m.dilated(1)));
}

TEST_CASE("unstable tiles tessellate the line", "[torus][tiles]") {
    const auto base = TorusPoint::from_double(0.1, 0.2);
    const auto segs = tessellate(base, 0.2, 1.0);
    const auto c = check_tessellation(segs);
    CHECK(c.disjoint);
    CHECK(c.covering);
    CHECK(c.lo <= -1.0);
    CHECK(c.hi >= 1.0);

    auto gap = segs;
    gap.erase(gap.begin() + 3);
    CHECK_FALSE(check_tessellation(gap).covering);
    auto dup = segs;
    dup.insert(dup.begin() + 3, segs[3]);
    CHECK_FALSE(check_tessellation(dup).disjoint);

    CHECK_THROWS_AS(tessellate(base, 0.3, 1.0), DomainError);
    CHECK(bowen_inclusion(0.2).holds);
    CHECK(bowen_inclusion(0.2).haar == 0.05);
}

TEST_CASE("contracted tile count", "[torus][tiles]") {
    const auto hm = cat_map();
    const auto c2 = lemma_covering_count(2, 0.1, hm);
    CHECK(c2.exact == 7);
    CHECK_THAT(c2.bound, WithinAbs(8.854101966, 1e-8));
    CHECK(c2.holds);
    CHECK_FALSE(c2.hypothesis_met);
    CHECK(lemma_covering_count(3, 0.1, hm).hypothesis_met);
    for (int t = 1; t <= 30; ++t) CHECK(lemma_covering_count(t, 0.1, hm).holds);
    CHECK(c0_fit(1, 30, 0.1, hm) <= 2.0);
    CHECK(lemma_covering_count(5, 0.01, hm).exact == lemma_covering_count(5, 0.2, hm).exact);
}

TEST_CASE("Bowen segments fit in one ball", "[torus][tiles]") {
    const auto hm = cat_map();
    for (int t = 1; t <= 20; ++t) {
        const auto b = coveringballs_check(t, 0.1, hm);
        CHECK(b.holds);
        CHECK(b.balls == 1);
    }
}

TEST_CASE("expanded segments equidistribute", "[torus][equidistribution]") {
    const auto hm = cat_map();
    const auto x = TorusPoint::from_double(0.2137, 0.5821);
    const RectUnion O{{Rect::make(0.1, 0.3, 0.4, 0.5)}};
    const auto p = equidistribution_estimate(x, O, 0.2, 30, 100000, 1, hm);
    CHECK_THAT(p.target, WithinAbs(0.2, 1e-12));
    CHECK(p.residual <= 3.0 * p.standard_error);

    // at t = 0 the segment stays near x, far from O
    const auto near = equidistribution_estimate(TorusPoint::from_double(0.8, 0.1), O, 0.2, 0, 10000, 1, hm);
    CHECK(near.estimate == 0.0);
}

TEST_CASE("standard error halves when samples quadruple", "[torus][equidistribution]") {
    const auto hm = cat_map();
    const auto x = TorusPoint::from_double(0.37, 0.11);
    const RectUnion O{{Rect::make(0.0, 0.0, 0.5, 1.0)}};
    const auto a = equidistribution_estimate(x, O, 0.2, 25, 20000, 3, hm);
    const auto b = equidistribution_estimate(x, O, 0.2, 25, 80000, 3, hm);
    CHECK_THAT(b.standard_error / a.standard_error, WithinAbs(0.5, 0.1));
}

TEST_CASE("equidistribution decay fit", "[torus][equidistribution]") {
    const auto hm = cat_map();
    const auto x = TorusPoint::from_double(0.2137, 0.5821);
    const auto full = equidistribution_decay(x, RectUnion::full(), 0.2, 0, 6, 10000, 1, hm);
    CHECK(full.degenerate);
    CHECK(std::isnan(full.lambda_prime_fit));
    CHECK(full.inequality_holds);

    const RectUnion O{{Rect::make(0.1, 0.3, 0.4, 0.5)}};
    const auto d = equidistribution_decay(x, O, 0.2, 0, 12, 20000, 5, hm);
    CHECK(d.points.size() == 13);
    CHECK(d.inequality_holds);
    if (!d.degenerate) CHECK(d.lambda_prime_fit > 0.0);
    CHECK_THROWS_AS(equidistribution_decay(x, O, 0.2, 0, 3, 100, 1, hm), DomainError);
}

TEST_CASE("escape sampler routes agree", "[torus][escape]") {
    const auto hm = cat_map();
    const RectUnion holes[] = {RectUnion::complement_of_square(0.0, 0.0, 0.1), RectUnion{{Rect::make(0.4, 0.4, 0.03, 0.02)}},
                               RectUnion::empty()};
    for (const auto& O : holes)
    for (double delta : {0.5, 0.9, 1.0})
        for (auto [N, T] : {std::pair{2, 3}, std::pair{3, 4}}) {
            EscapeSampleConfig cfg;
            cfg.x = TorusPoint::from_double(0.0, 0.0);
            cfg.O = O;
            cfg.delta = delta;
            cfg.N = N;
            cfg.T = T;
            cfg.seed = 11;
            const auto a = sample_escape_set(cfg, hm);
            const auto b = sample_escape_set_direct(cfg, hm);
            CHECK(a.counts == b.counts);
            CHECK(a.marked == b.marked);
            CHECK(a.samples == b.samples);
        }
}

TEST_CASE("escape counts shrink as delta grows", "[torus][escape]") {
    const auto hm = cat_map();
    EscapeSampleConfig cfg;
    cfg.x = TorusPoint::from_double(0.31, 0.77);
    cfg.O = RectUnion{{Rect::make(0.2, 0.2, 0.5, 0.5)}};
    cfg.N = 3;
    cfg.T = 4;
    std::vector<std::uint64_t> prev;
    for (double delta : {0.2, 0.5, 0.8, 0.95, 1.0}) {
        cfg.delta = delta;
        const auto rep = sample_escape_set(cfg, hm);
        if (!prev.empty())
            for (std::size_t k = 0; k < prev.size(); ++k) CHECK(rep.counts[k] <= prev[k]);
        prev = rep.counts;
    }
}

TEST_CASE("escape set of an empty hole is the whole segment", "[torus][escape]") {
    const auto hm = cat_map();
    EscapeSampleConfig cfg;
    cfg.O = RectUnion::empty();
    cfg.N = 4;
    cfg.T = 5;
    const auto rep = sample_escape_set(cfg, hm);
    CHECK(rep.marked == rep.samples);
    CHECK(rep.counts.back() == static_cast<std::uint64_t>(std::ceil(std::pow(hm.lambda_u, 20))));
    CHECK_THAT(rep.exponent, WithinAbs(1.0, 1e-6));
    CHECK(rep.y5r == 0.0);
    CHECK(rep.theoretical_codim == 0.0);
    CHECK(rep.consistent);
}

TEST_CASE("escape sampler output", "[torus][escape]") {
    const auto hm = cat_map();
    EscapeSampleConfig cfg;
    cfg.delta = 0.999;
    cfg.seed = 5;
    const auto a = sample_escape_set(cfg, hm);
    const auto b = sample_escape_set(cfg, hm);
    CHECK(a.counts == b.counts);
    CHECK(a.exponent == b.exponent);
    CHECK(a.horizons == std::vector<int>{6, 12, 18});
    CHECK(a.scales.size() == 3);
    CHECK(a.scales[0] > a.scales[1]);
    CHECK_THAT(a.y5r, WithinAbs(0.91, 1e-12));
    CHECK_THAT(a.delta_threshold, WithinAbs(0.983541890959, 1e-8));
    CHECK(a.drop_achieved);
    CHECK(a.exponent < 1.0);
    CHECK(a.consistent);

    cfg.N = 10;
    cfg.T = 10;
    CHECK_THROWS_AS(sample_escape_set(cfg, hm), BudgetError);
}

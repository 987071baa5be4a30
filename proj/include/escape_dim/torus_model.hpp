#pragma once

// Hyperbolic automorphisms of the 2-torus in the sup metric: cores and
// neighbourhoods of rectangle unions, unstable-line tessellations, tile overlap
// counts, equidistribution of expanded segments and empirical covering counts
// of finite-horizon escape sets.
//
// Base orbits are exact: points carry dyadic coordinates k / 2^64 and the
// integer matrix acts by wrapping 64-bit arithmetic. Displacements along the
// unstable direction are tracked separately in long double.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bound_core.hpp"
#include "covering_combinatorics.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace escape_dim {

using IntMatrix2 = std::array<std::array<std::int64_t, 2>, 2>;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct HyperbolicMap {
    IntMatrix2 m{};
    double eigenvalue = 0.0;  // signed unstable eigenvalue
    double lambda_u = 0.0;    // |eigenvalue|
    Vec2 u_dir;
    Vec2 s_dir;

    double log_lambda() const { return std::log(lambda_u); }
};

namespace detail {

inline Vec2 unit_eigenvector(const IntMatrix2& m, double mu) {
    const double a = static_cast<double>(m[0][0]), b = static_cast<double>(m[0][1]);
    const double c = static_cast<double>(m[1][0]), d = static_cast<double>(m[1][1]);
    Vec2 v = b != 0.0 ? Vec2{b, mu - a} : Vec2{mu - d, c};
    const double n = std::hypot(v.x, v.y);
    v.x /= n;
    v.y /= n;
    if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) {
        v.x = -v.x;
        v.y = -v.y;
    }
    return v;
}

inline double frac(double v) { return v - std::floor(v); }
inline long double fracl(long double v) { return v - std::floor(v); }

} // namespace detail

inline HyperbolicMap eigen_data(const IntMatrix2& m) {
    const std::int64_t det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    const std::int64_t tr = m[0][0] + m[1][1];
    if (det != 1) throw DomainError("eigen_data: determinant must be 1");
    if (tr >= -2 && tr <= 2) throw DomainError("eigen_data: not hyperbolic (|trace| <= 2)");
    const double trd = static_cast<double>(tr);
    const double root = std::sqrt(trd * trd - 4.0);
    HyperbolicMap hm;
    hm.m = m;
    hm.eigenvalue = tr > 0 ? 0.5 * (trd + root) : 0.5 * (trd - root);
    hm.lambda_u = std::abs(hm.eigenvalue);
    hm.u_dir = detail::unit_eigenvector(m, hm.eigenvalue);
    hm.s_dir = detail::unit_eigenvector(m, 1.0 / hm.eigenvalue);
    return hm;
}

inline HyperbolicMap cat_map() { return eigen_data({{{2, 1}, {1, 1}}}); }

// ---------------------------------------------------------------------------
// Points and orbits

/// Torus point with coordinates x / 2^64, y / 2^64.
struct TorusPoint {
    std::uint64_t x = 0;
    std::uint64_t y = 0;

    static TorusPoint from_double(double a, double b) {
        auto conv = [](double v) {
            const long double f = detail::fracl(static_cast<long double>(v));
            const long double scaled = std::ldexp(f, 64);
            return scaled >= 0x1.0p64L ? std::uint64_t{0} : static_cast<std::uint64_t>(scaled);
        };
        return {conv(a), conv(b)};
    }

    double xd() const { return std::ldexp(static_cast<double>(x), -64); }
    double yd() const { return std::ldexp(static_cast<double>(y), -64); }
    long double xl() const { return std::ldexp(static_cast<long double>(x), -64); }
    long double yl() const { return std::ldexp(static_cast<long double>(y), -64); }

    friend bool operator==(const TorusPoint&, const TorusPoint&) = default;
};

/// Image of a point under the matrix; exact modulo 1.
inline TorusPoint map_point(const IntMatrix2& m, const TorusPoint& p) {
    const auto c = [](std::int64_t v) { return static_cast<std::uint64_t>(v); };
    return {c(m[0][0]) * p.x + c(m[0][1]) * p.y, c(m[1][0]) * p.x + c(m[1][1]) * p.y};
}

/// Orbit of x + h u: base points g^t x and unstable multipliers eigenvalue^t u.
class UnstableOrbit {
public:
    UnstableOrbit(const HyperbolicMap& hm, const TorusPoint& x, int horizon) {
        detail::require(horizon >= 1, "UnstableOrbit: horizon must be positive");
        TorusPoint p = x;
        long double mul = 1.0L;
        for (int t = 0; t < horizon; ++t) {
            bx_.push_back(p.xl());
            by_.push_back(p.yl());
            ux_.push_back(mul * hm.u_dir.x);
            uy_.push_back(mul * hm.u_dir.y);
            p = map_point(hm.m, p);
            mul *= static_cast<long double>(hm.eigenvalue);
        }
    }

    int horizon() const { return static_cast<int>(bx_.size()); }

    /// Unreduced lift of at(t, h).
    std::array<long double, 2> lifted(int t, double h) const {
        const auto i = static_cast<std::size_t>(t);
        return {bx_[i] + h * ux_[i], by_[i] + h * uy_[i]};
    }

    /// Largest coordinate stretch of the unstable direction at time t.
    long double stretch(int t) const {
        const auto i = static_cast<std::size_t>(t);
        return std::max(std::abs(ux_[i]), std::abs(uy_[i]));
    }

    /// Position at time t of the point displaced by h along the unstable direction.
    Vec2 at(int t, double h) const {
        const auto i = static_cast<std::size_t>(t);
        return {static_cast<double>(detail::fracl(bx_[i] + h * ux_[i])),
                static_cast<double>(detail::fracl(by_[i] + h * uy_[i]))};
    }

private:
    std::vector<long double> bx_, by_, ux_, uy_;
};

// ---------------------------------------------------------------------------
// Rectangles

/// Open axis-aligned rectangle (x0, x0 + w) x (y0, y0 + h) taken mod 1. A side
/// of length 1 wraps all the way round and has no boundary.
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double w = 0.0;
    double h = 0.0;

    static Rect make(double x0, double y0, double w, double h) {
        Rect r;
        r.w = std::clamp(w, 0.0, 1.0);
        r.h = std::clamp(h, 0.0, 1.0);
        r.x0 = r.w >= 1.0 ? 0.0 : detail::frac(x0);
        r.y0 = r.h >= 1.0 ? 0.0 : detail::frac(y0);
        return r;
    }

    void validate() const {
        detail::require(x0 >= 0.0 && x0 < 1.0 && y0 >= 0.0 && y0 < 1.0, "Rect: corner must lie in [0,1)^2");
        detail::require(w >= 0.0 && w <= 1.0 && h >= 0.0 && h <= 1.0, "Rect: sides must lie in [0,1]");
    }

    bool contains(double px, double py) const {
        const bool in_x = w >= 1.0 || (detail::frac(px - x0) > 0.0 && detail::frac(px - x0) < w);
        if (!in_x) return false;
        return h >= 1.0 || (detail::frac(py - y0) > 0.0 && detail::frac(py - y0) < h);
    }

    double area() const { return w * h; }

    /// Open r-neighbourhood in the sup metric.
    Rect dilated(double r) const { return make(x0 - r, y0 - r, w >= 1.0 ? 1.0 : w + 2 * r, h >= 1.0 ? 1.0 : h + 2 * r); }

    friend bool operator==(const Rect&, const Rect&) = default;
};

struct RectUnion {
    std::vector<Rect> rects;

    static RectUnion empty() { return {}; }
    static RectUnion full() { return {{Rect::make(0, 0, 1, 1)}}; }

    /// Torus minus the closed square of half-width `half` centred at (cx, cy).
    static RectUnion complement_of_square(double cx, double cy, double half) {
        detail::require(half > 0.0 && half < 0.5, "complement_of_square: half-width must lie in (0, 0.5)");
        return {{Rect::make(cx + half, 0.0, 1.0 - 2 * half, 1.0), Rect::make(0.0, cy + half, 1.0, 1.0 - 2 * half)}};
    }

    void validate() const {
        for (const auto& r : rects) r.validate();
    }

    bool contains(double px, double py) const {
        for (const auto& r : rects)
            if (r.contains(px, py)) return true;
        return false;
    }

    bool contains(const Vec2& p) const { return contains(p.x, p.y); }

    double measure() const;
};

namespace detail {

/// Product partition of the torus by all rectangle edges; each cell lies
/// entirely inside or entirely outside the union.
struct CellPartition {
    std::vector<double> xs;  // cell edges, xs.front() = 0, xs.back() = 1
    std::vector<double> ys;
    std::vector<std::uint8_t> inside;  // row-major, index j * nx + i

    std::size_t nx() const { return xs.size() - 1; }
    std::size_t ny() const { return ys.size() - 1; }
    bool in(std::size_t i, std::size_t j) const { return inside[j * nx() + i] != 0; }
};

inline std::vector<double> edges(const std::vector<Rect>& rects, bool along_x) {
    std::vector<double> e{0.0, 1.0};
    for (const auto& r : rects) {
        const double o = along_x ? r.x0 : r.y0, len = along_x ? r.w : r.h;
        if (len >= 1.0 || len <= 0.0) continue;
        e.push_back(o);
        e.push_back(frac(o + len));
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
}

inline CellPartition partition(const RectUnion& U) {
    CellPartition p;
    p.xs = edges(U.rects, true);
    p.ys = edges(U.rects, false);
    p.inside.assign(p.nx() * p.ny(), 0);
    for (std::size_t j = 0; j < p.ny(); ++j) {
        const double cy = 0.5 * (p.ys[j] + p.ys[j + 1]);
        for (std::size_t i = 0; i < p.nx(); ++i) {
            const double cx = 0.5 * (p.xs[i] + p.xs[i + 1]);
            p.inside[j * p.nx() + i] = U.contains(cx, cy) ? 1 : 0;
        }
    }
    return p;
}

/// Cells of the partition with the given membership, merged along rows.
inline RectUnion cells_as_union(const CellPartition& p, bool want_inside) {
    RectUnion out;
    for (std::size_t j = 0; j < p.ny(); ++j) {
        std::size_t i = 0;
        while (i < p.nx()) {
            if (p.in(i, j) != want_inside) {
                ++i;
                continue;
            }
            std::size_t k = i;
            while (k < p.nx() && p.in(k, j) == want_inside) ++k;
            out.rects.push_back(Rect::make(p.xs[i], p.ys[j], p.xs[k] - p.xs[i], p.ys[j + 1] - p.ys[j]));
            i = k;
        }
    }
    return out;
}

} // namespace detail

inline double RectUnion::measure() const {
    if (rects.empty()) return 0.0;
    const auto p = detail::partition(*this);
    double area = 0.0;
    for (std::size_t j = 0; j < p.ny(); ++j)
        for (std::size_t i = 0; i < p.nx(); ++i)
            if (p.in(i, j)) area += (p.xs[i + 1] - p.xs[i]) * (p.ys[j + 1] - p.ys[j]);
    return area;
}

/// {x : dist(x, O) < r}; dilation distributes over unions.
inline RectUnion neighborhood(const RectUnion& O, double r) {
    detail::require(r >= 0.0, "neighborhood: r must be non-negative");
    RectUnion out;
    for (const auto& rect : O.rects)
        if (rect.area() > 0.0) out.rects.push_back(rect.dilated(r));
    return out;
}

/// Inner r-core {x : dist(x, O^c) > r} of a single rectangle.
inline RectUnion sigma_core(const Rect& rect, double r) {
    detail::require(r > 0.0, "sigma_core: r must be positive");
    const double w = rect.w >= 1.0 ? 1.0 : rect.w - 2 * r;
    const double h = rect.h >= 1.0 ? 1.0 : rect.h - 2 * r;
    if (w <= 0.0 || h <= 0.0) return {};
    return {{Rect::make(rect.w >= 1.0 ? 0.0 : rect.x0 + r, rect.h >= 1.0 ? 0.0 : rect.y0 + r, w, h)}};
}

/// Inner r-core of a union, computed exactly as the complement of the
/// r-neighbourhood of the complement (the complement is a finite union of cells).
inline RectUnion sigma_core(const RectUnion& O, double r) {
    detail::require(r > 0.0, "sigma_core: r must be positive");
    if (O.rects.empty()) return {};
    if (O.rects.size() == 1) return sigma_core(O.rects.front(), r);
    const auto p = detail::partition(O);
    const RectUnion outside = detail::cells_as_union(p, false);
    if (outside.rects.empty()) return RectUnion::full();
    const RectUnion grown = neighborhood(outside, r);
    return detail::cells_as_union(detail::partition(grown), false);
}

// ---------------------------------------------------------------------------
// Grid route

/// Square raster of the torus; cell (i, j) is in the set when its centre is.
class GridMask {
public:
    GridMask(int n, std::vector<std::uint8_t> cells) : n_(n), cells_(std::move(cells)) {}

    static GridMask rasterize(const RectUnion& O, int n) {
        detail::require(n >= 1 && n <= 16384, "GridMask: resolution must lie in [1, 16384]");
        std::vector<std::uint8_t> cells(static_cast<std::size_t>(n) * n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                cells[static_cast<std::size_t>(j) * n + i] = O.contains((i + 0.5) / n, (j + 0.5) / n) ? 1 : 0;
        return {n, std::move(cells)};
    }

    int n() const { return n_; }
    bool at(int i, int j) const { return cells_[index(i, j)] != 0; }

    double measure() const {
        return static_cast<double>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1})) /
               (static_cast<double>(n_) * n_);
    }

    /// Area of cells with a 4-neighbour of the other kind; one-cell error bar on measure().
    double boundary_measure() const {
        std::size_t count = 0;
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const bool v = at(i, j);
                if (at(i + 1, j) != v || at(i - 1, j) != v || at(i, j + 1) != v || at(i, j - 1) != v) ++count;
            }
        return static_cast<double>(count) / (static_cast<double>(n_) * n_);
    }

    /// Sup-metric erosion (keep) or dilation by k cells, separable and wrapping.
    GridMask eroded(int k) const { return morph(k, true); }
    GridMask dilated(int k) const { return morph(k, false); }

    bool subset_of(const GridMask& other) const {
        detail::require(n_ == other.n_, "GridMask: resolution mismatch");
        for (std::size_t c = 0; c < cells_.size(); ++c)
            if (cells_[c] && !other.cells_[c]) return false;
        return true;
    }

private:
    std::size_t index(int i, int j) const {
        i = ((i % n_) + n_) % n_;
        j = ((j % n_) + n_) % n_;
        return static_cast<std::size_t>(j) * n_ + i;
    }

    GridMask morph(int k, bool erode) const {
        detail::require(k >= 0, "GridMask: radius must be non-negative");
        if (k == 0) return *this;
        if (2 * k + 1 >= n_) {
            // the window covers a whole row: result is all-or-nothing per line
            const bool any = std::find(cells_.begin(), cells_.end(), std::uint8_t{1}) != cells_.end();
            const bool all = std::find(cells_.begin(), cells_.end(), std::uint8_t{0}) == cells_.end();
            return {n_, std::vector<std::uint8_t>(cells_.size(), erode ? all : any)};
        }
        // count of "other" cells in a sliding window; pass along x, then along y
        auto pass = [&](const std::vector<std::uint8_t>& src, bool along_x) {
            std::vector<std::uint8_t> dst(src.size());
            const std::uint8_t other = erode ? 0 : 1;
            for (int line = 0; line < n_; ++line) {
                auto get = [&](int pos) {
                    pos = ((pos % n_) + n_) % n_;
                    const std::size_t c = along_x ? static_cast<std::size_t>(line) * n_ + pos
                                                  : static_cast<std::size_t>(pos) * n_ + line;
                    return src[c];
                };
                int window = 0;
                for (int d = -k; d <= k; ++d) window += get(d) == other;
                for (int pos = 0; pos < n_; ++pos) {
                    const std::size_t c = along_x ? static_cast<std::size_t>(line) * n_ + pos
                                                  : static_cast<std::size_t>(pos) * n_ + line;
                    dst[c] = erode ? (window == 0) : (window > 0);
                    window += (get(pos + k + 1) == other) - (get(pos - k) == other);
                }
            }
            return dst;
        };
        return {n_, pass(pass(cells_, true), false)};
    }

    int n_;
    std::vector<std::uint8_t> cells_;
};

struct GridEstimate {
    GridMask mask;
    double measure = 0.0;
    double error = 0.0;
};

namespace detail {

inline int grid_radius(double r, int n) {
    detail::require(r > 0.0, "grid: r must be positive");
    if (1.0 / n > r / 8.0 * (1.0 + 1e-12)) throw DomainError("grid: resolution too coarse (cell must be <= r/8)");
    return static_cast<int>(std::lround(r * n));
}

} // namespace detail

inline GridEstimate sigma_core_grid(const RectUnion& O, double r, int n) {
    const int k = detail::grid_radius(r, n);
    GridMask m = GridMask::rasterize(O, n).eroded(k);
    const double mu = m.measure(), err = m.boundary_measure();
    return {std::move(m), mu, err};
}

inline GridEstimate neighborhood_grid(const RectUnion& O, double r, int n) {
    const int k = detail::grid_radius(r, n);
    GridMask m = GridMask::rasterize(O, n).dilated(k);
    const double mu = m.measure(), err = m.boundary_measure();
    return {std::move(m), mu, err};
}

// ---------------------------------------------------------------------------
// Unstable segments

/// Segment of the unstable line through `base`, centred `offset` away from it.
struct UnstableSegment {
    TorusPoint base;
    double offset = 0.0;
    double half_length = 0.0;

    double lo() const { return offset - half_length; }
    double hi() const { return offset + half_length; }
};

/// V_r (length r/4, centred at base) and its translates by multiples of r/4
/// out to `window` on each side.
inline std::vector<UnstableSegment> tessellate(const TorusPoint& base, double r, double window,
                                               const SystemConstants& k = SystemConstants::catmap()) {
    detail::require(r > 0.0 && r <= k.r2() * (1.0 + 1e-15), "tessellate: r must lie in (0, r2]");
    detail::require(window >= 0.0, "tessellate: window must be non-negative");
    const double len = r / 4.0;
    const auto K = static_cast<long>(std::ceil(window / len - 0.5));
    std::vector<UnstableSegment> out;
    for (long i = -K; i <= K; ++i) {
        UnstableSegment s;
        s.base = base;
        s.offset = static_cast<double>(i) * len;
        s.half_length = 0.5 * len;
        out.push_back(s);
    }
    return out;
}

struct TessellationCheck {
    bool disjoint = true;
    bool covering = true;
    double lo = 0.0;
    double hi = 0.0;
};

/// Translates are compared through their tile-lattice index k (offset = k len),
/// so the check is exact: interiors disjoint iff the indices strictly increase,
/// closures cover iff consecutive indices differ by one.
inline TessellationCheck check_tessellation(const std::vector<UnstableSegment>& segs) {
    TessellationCheck c;
    if (segs.empty()) return c;
    c.lo = segs.front().lo();
    c.hi = segs.back().hi();
    const double len = 2.0 * segs.front().half_length;
    std::vector<long> idx;
    for (const auto& s : segs) {
        const double k = s.offset / len;
        if (s.half_length != segs.front().half_length || std::abs(k - std::round(k)) > 1e-9) {
            c.disjoint = c.covering = false;
            return c;
        }
        idx.push_back(std::lround(k));
    }
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        if (idx[i + 1] <= idx[i]) c.disjoint = false;
        if (idx[i + 1] - idx[i] > 1) c.covering = false;
    }
    return c;
}

/// Radii of the balls nested around V_r on the unstable line.
struct BowenInclusion {
    double inner = 0.0;   // r / 16
    double v_half = 0.0;  // r / 8
    double outer = 0.0;   // r / 4
    double haar = 0.0;    // nu(V_r) = r / 4
    bool holds = false;
};

inline BowenInclusion bowen_inclusion(double r) {
    detail::require(r > 0.0, "bowen_inclusion: r must be positive");
    BowenInclusion b;
    b.inner = r / 16.0;
    b.v_half = r / 8.0;
    b.outer = r / 4.0;
    b.haar = 2.0 * b.v_half;
    b.holds = b.inner <= b.v_half && b.v_half <= b.outer;
    return b;
}

struct CoveringCount {
    int t = 0;
    std::int64_t exact = 0;
    double bound = 0.0;       // e^{eta t} (1 + 2 e^{-lambda t})
    double c0_needed = 0.0;   // smallest c0 with exact <= e^{eta t} (1 + c0 e^{-lambda t})
    bool hypothesis_met = false;  // t > ln 8 / ln lambda_u
    bool holds = false;
};

/// Translates of the tile lattice, contracted by lambda_u^{-t}, whose closures
/// meet the open tile V_r. With tile length len these are the k with
/// |k| len lambda^{-t} - len lambda^{-t} / 2 < len / 2, i.e. 2|k| - 1 < lambda^t,
/// independent of r. lambda^t = tau - lambda^{-t} with tau = |tr M^t| an integer,
/// so the count is exact: |k| <= floor(tau / 2).
inline CoveringCount lemma_covering_count(int t, double r, const HyperbolicMap& hm) {
    detail::require(t >= 1, "lemma_covering_count: t must be at least 1");
    detail::require(r > 0.0, "lemma_covering_count: r must be positive");
    // tr M^{t+1} = tr M * tr M^t - tr M^{t-1} since det M = 1
    const std::int64_t tr1 = hm.m[0][0] + hm.m[1][1];
    std::int64_t prev = 2, cur = tr1;
    for (int i = 1; i < t; ++i) {
        std::int64_t next = 0;
        if (__builtin_mul_overflow(tr1, cur, &next) || __builtin_sub_overflow(next, prev, &next))
            throw DomainError("lemma_covering_count: t too large for exact traces");
        prev = cur;
        cur = next;
    }
    const std::int64_t tau = cur < 0 ? -cur : cur;
    const long double grow = std::pow(static_cast<long double>(hm.lambda_u), t);
    CoveringCount c;
    c.t = t;
    c.exact = 2 * (tau / 2) + 1;
    c.bound = static_cast<double>(grow) + 2.0;
    c.c0_needed = std::max(0.0L, static_cast<long double>(c.exact - tau) + 1.0L / grow);
    c.hypothesis_met = t > std::log(8.0) / hm.log_lambda();
    // exact <= tau + 2 - lambda^{-t} with 0 < lambda^{-t} < 1
    c.holds = c.exact <= tau + 1;
    return c;
}

/// Smallest c0 for which every count over t in [t_lo, t_hi] satisfies the overlap bound.
inline double c0_fit(int t_lo, int t_hi, double r, const HyperbolicMap& hm) {
    double c0 = 0.0;
    for (int t = t_lo; t <= t_hi; ++t) c0 = std::max(c0, lemma_covering_count(t, r, hm).c0_needed);
    return c0;
}

/// A Bowen (t, r)-segment of length (r/4) lambda^{-t} inside balls of radius r lambda^{-t}.
struct BallCover {
    double segment_length = 0.0;
    double ball_radius = 0.0;
    int balls = 0;
    bool holds = false;
};

inline BallCover coveringballs_check(int t, double r, const HyperbolicMap& hm) {
    detail::require(t >= 1 && r > 0.0, "coveringballs_check: need t >= 1 and r > 0");
    BallCover b;
    const double shrink = std::pow(hm.lambda_u, -t);
    b.segment_length = 0.25 * r * shrink;
    b.ball_radius = r * shrink;
    b.balls = static_cast<int>(std::ceil(b.segment_length / (2.0 * b.ball_radius)));
    b.holds = b.balls <= 1;
    return b;
}

// ---------------------------------------------------------------------------
// Equidistribution of expanded segments

struct EquidistributionPoint {
    int t = 0;
    double estimate = 0.0;
    double standard_error = 0.0;
    double target = 0.0;
    double residual = 0.0;  // |estimate - target|
};

/// Fraction of h uniform in V_r with g^t(x + h u) in O, by plain Monte Carlo.
inline EquidistributionPoint equidistribution_estimate(const TorusPoint& x, const RectUnion& O, double r, int t,
                                                       std::uint64_t samples, std::uint64_t seed,
                                                       const HyperbolicMap& hm) {
    detail::require(samples >= 1, "equidistribution_estimate: need samples");
    detail::require(t >= 0 && r > 0.0, "equidistribution_estimate: need t >= 0 and r > 0");
    const UnstableOrbit orbit(hm, x, t + 1);
    const std::size_t chunks = chunk_count(samples);
    std::vector<std::uint64_t> hits(chunks, 0);
    parallel_chunks(samples, [&](std::size_t c, std::size_t b, std::size_t e) {
        std::uint64_t local = 0;
        for (std::size_t i = b; i < e; ++i) {
            const double h = (keyed_uniform(seed, static_cast<std::uint64_t>(t), i) - 0.5) * 0.25 * r;
            if (O.contains(orbit.at(t, h))) ++local;
        }
        hits[c] = local;
    });
    const auto total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
    EquidistributionPoint p;
    p.t = t;
    p.estimate = static_cast<double>(total) / static_cast<double>(samples);
    p.standard_error = std::sqrt(p.estimate * (1.0 - p.estimate) / static_cast<double>(samples));
    p.target = O.measure();
    p.residual = std::abs(p.estimate - p.target);
    return p;
}

struct EquidistributionDecay {
    std::vector<EquidistributionPoint> points;
    double lambda_prime_fit = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = true;
    int fit_points = 0;
    /// estimate + 3 SE >= mu(sigma_rho O) - rho / nu(V_r), rho = e^{-lambda' t}, at every t
    bool inequality_holds = true;
};

/// Estimates over t_lo..t_hi and a log-linear fit of the residual decay. Only
/// residuals above twice their standard error enter the fit; with fewer than
/// two of them, or a non-decaying fit, the result is flagged degenerate.
inline EquidistributionDecay equidistribution_decay(const TorusPoint& x, const RectUnion& O, double r, int t_lo,
                                                    int t_hi, std::uint64_t samples, std::uint64_t seed,
                                                    const HyperbolicMap& hm) {
    detail::require(samples >= 10000, "equidistribution_decay: need at least 1e4 samples");
    detail::require(0 <= t_lo && t_lo <= t_hi, "equidistribution_decay: bad t range");
    EquidistributionDecay d;
    for (int t = t_lo; t <= t_hi; ++t) d.points.push_back(equidistribution_estimate(x, O, r, t, samples, seed, hm));

    double st = 0, sy = 0, stt = 0, sty = 0;
    int n = 0;
    for (const auto& p : d.points) {
        if (!(p.residual > 2.0 * p.standard_error) || p.residual <= 0.0) continue;
        const double y = std::log(p.residual);
        st += p.t;
        sy += y;
        stt += static_cast<double>(p.t) * p.t;
        sty += p.t * y;
        ++n;
    }
    d.fit_points = n;
    if (n >= 2) {
        const double den = n * stt - st * st;
        const double slope = den != 0.0 ? (n * sty - st * sy) / den : 0.0;
        if (slope < 0.0) {
            d.lambda_prime_fit = -slope;
            d.degenerate = false;
        }
    }
    const double rate = d.degenerate ? hm.log_lambda() : d.lambda_prime_fit;
    const double haar = 0.25 * r;
    for (const auto& p : d.points) {
        const double rho = std::exp(-rate * p.t);
        const double core = rho > 0.0 ? sigma_core(O, rho).measure() : O.measure();
        if (p.estimate + 3.0 * p.standard_error < core - rho / haar) d.inequality_holds = false;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Empirical covering counts of the finite-horizon escape set

struct EscapeSampleConfig {
    TorusPoint x;
    RectUnion O = RectUnion::complement_of_square(0.0, 0.0, 0.1);
    double r = 0.01;
    double delta = 1.0;
    int N = 3;
    int T = 6;
    int grid_per_box = 4;
    std::uint64_t seed = 0;
    double tolerance = 0.1;
    SystemConstants constants = SystemConstants::catmap();
};

struct EmpiricalDimReport {
    std::vector<int> horizons;             // k T for k = 1..N
    std::vector<double> scales;            // box length at each horizon
    std::vector<std::uint64_t> counts;     // boxes meeting a marked sample
    double exponent = 0.0;                 // ln(count at NT) / (NT ln lambda_u)
    double theoretical_codim = 0.0;
    double tolerance = 0.1;
    bool consistent = false;
    double mu_O = 0.0;
    double y5r = 0.0;
    double delta_threshold = 1.0;
    bool drop_achieved = false;
    std::uint64_t samples = 0;
    std::uint64_t marked = 0;
};

inline constexpr double kScaleBudget = 25.0;
inline constexpr std::uint64_t kMaxEscapeSamples = std::uint64_t{1} << 32;

namespace detail {

/// Run-length count of distinct box indices visited in increasing order.
struct LevelRun {
    std::uint64_t count = 0;
    std::int64_t first = -1;
    std::int64_t last = -1;

    void add(std::int64_t box) {
        if (last == box) return;
        ++count;
        if (first < 0) first = box;
        last = box;
    }

    /// Every box in [a, b], with a >= last.
    void add_range(std::int64_t a, std::int64_t b) {
        add(a);
        count += static_cast<std::uint64_t>(b - a);
        last = b;
    }
};

struct EscapeCounts {
    std::vector<std::uint64_t> counts;  // per level
    std::uint64_t marked = 0;
};

/// Everything both counting routes share: box counts per level, the sample
/// layout and the miss allowance over the full horizon.
class EscapeSampler {
public:
    EscapeSampler(const EscapeSampleConfig& cfg, const HyperbolicMap& hm)
        : cfg_(cfg), NT_(cfg.N * cfg.T), orbit_(hm, cfg.x, std::max(1, cfg.N * cfg.T)) {
        detail::require(cfg.N >= 1 && cfg.T >= 1, "sample_escape_set: need N, T >= 1");
        detail::require(cfg.delta > 0.0 && cfg.delta <= 1.0, "sample_escape_set: delta must lie in (0,1]");
        detail::require(cfg.grid_per_box >= 4, "sample_escape_set: grid_per_box must be at least 4");
        detail::require(cfg.r > 0.0 && cfg.r <= cfg.constants.r2() / 5.0 * (1.0 + 1e-15),
                        "sample_escape_set: r must lie in (0, r2/5]");
        cfg.O.validate();
        if (NT_ * hm.log_lambda() > kScaleBudget)
            throw BudgetError("sample_escape_set: N T ln(lambda_u) = " + std::to_string(NT_ * hm.log_lambda()) +
                              " exceeds scale budget 25");
        for (int k = 1; k <= cfg.N; ++k)
            boxes_.push_back(
                static_cast<std::uint64_t>(std::ceil(std::pow(static_cast<long double>(hm.lambda_u), k * cfg.T))));
        gpb_ = static_cast<std::uint64_t>(cfg.grid_per_box);
        if (boxes_.back() > kMaxEscapeSamples / gpb_) throw BudgetError("sample_escape_set: sample count exceeds 2^32");
        const int need = std::clamp(tolerant_ceil(cfg.delta * NT_), 0, NT_);
        allowed_ = NT_ - need;
        len_ = 0.25 * cfg.r;
    }

    const std::vector<std::uint64_t>& boxes() const { return boxes_; }
    std::uint64_t finest() const { return boxes_.back(); }
    std::uint64_t samples() const { return finest() * gpb_; }
    double box_length(std::size_t level) const { return len_ / static_cast<double>(boxes_[level]); }

    /// Position of sample g of finest box j, as a fraction of V_r.
    double sample_u(std::uint64_t j, std::uint64_t g) const {
        const double jitter = keyed_uniform(cfg_.seed, j, g);
        const double M = static_cast<double>(finest());
        const double u = (static_cast<double>(j) + (static_cast<double>(g) + jitter) / static_cast<double>(gpb_)) / M;
        return std::min(u, std::nextafter(static_cast<double>(j + 1) / M, 0.0));
    }

    double h_of(double u) const { return (u - 0.5) * len_; }

    bool in_O(int t, double h) const { return cfg_.O.contains(orbit_.at(t, h)); }

    /// Direct route: every sample, every time step until the allowance is exhausted.
    EscapeCounts count_direct() const {
        return count_chunks([&](std::size_t b, std::size_t e, std::vector<LevelRun>& runs, std::uint64_t& marked) {
            for (std::size_t j = b; j < e; ++j)
                for (std::uint64_t g = 0; g < gpb_; ++g) {
                    const double u = sample_u(j, g);
                    const double h = h_of(u);
                    int misses = 0;
                    for (int t = 0; t < NT_ && misses <= allowed_; ++t) misses += in_O(t, h);
                    if (misses <= allowed_) mark(u, runs, marked);
                }
        });
    }

    /// Pruned route: descends the box hierarchy and drops a box once the image
    /// of the whole box lies inside O at more than the allowed number of times.
    /// Image tests use an outward margin, so every sample that survives is
    /// decided exactly as in count_direct().
    EscapeCounts count_pruned() const {
        const std::uint64_t M1 = boxes_.front();
        return count_chunks([&](std::size_t b, std::size_t e, std::vector<LevelRun>& runs, std::uint64_t& marked) {
            for (std::size_t j = b; j < e; ++j) {
                const double lo = static_cast<double>(j) / static_cast<double>(M1);
                const double hi = static_cast<double>(j + 1) / static_cast<double>(M1);
                visit(0, j, lo, hi, runs, marked);
            }
        }, M1);
    }

private:
    enum class Side { inside, outside, unknown };

    static constexpr long double kMargin = 1e-7L;

    /// Whether the straight image of [h_lo, h_hi] at time t lies in O, in O^c, or neither.
    Side classify(int t, double h_lo, double h_hi) const {
        if (cfg_.O.rects.empty()) return Side::outside;
        if ((h_hi - h_lo) * orbit_.stretch(t) > 0.25L) return Side::unknown;
        const auto a = orbit_.lifted(t, h_lo), b = orbit_.lifted(t, h_hi);
        const long double x_lo = std::min(a[0], b[0]) - kMargin, x_len = std::abs(a[0] - b[0]) + 2 * kMargin;
        const long double y_lo = std::min(a[1], b[1]) - kMargin, y_len = std::abs(a[1] - b[1]) + 2 * kMargin;
        bool meets = false;
        for (const auto& rect : cfg_.O.rects) {
            const long double dx = fracl(x_lo - rect.x0), dy = fracl(y_lo - rect.y0);
            const bool x_in = rect.w >= 1.0 || (dx > 0.0L && dx + x_len < rect.w);
            const bool y_in = rect.h >= 1.0 || (dy > 0.0L && dy + y_len < rect.h);
            if (x_in && y_in) return Side::inside;
            const bool x_out = rect.w < 1.0 && dx >= rect.w && dx + x_len <= 1.0L;
            const bool y_out = rect.h < 1.0 && dy >= rect.h && dy + y_len <= 1.0L;
            if (!(x_out || y_out)) meets = true;
        }
        return meets ? Side::unknown : Side::outside;
    }

    void visit(std::size_t level, std::uint64_t box, double u_lo, double u_hi, std::vector<LevelRun>& runs,
               std::uint64_t& marked) const {
        const double h_lo = h_of(u_lo), h_hi = h_of(u_hi);
        int misses = 0;
        std::uint32_t open_times = 0;
        for (int t = 0; t < NT_; ++t) {
            const Side s = classify(t, h_lo, h_hi);
            if (s == Side::inside && ++misses > allowed_) return;
            if (s == Side::unknown) open_times |= 1u << t;
        }
        if (open_times == 0) {
            mark_interval(u_lo, u_hi, runs, marked);
            return;
        }
        if (level + 1 == boxes_.size()) {
            for (std::uint64_t g = 0; g < gpb_; ++g) {
                const double u = sample_u(box, g);
                if (u < u_lo || u >= u_hi) continue;
                const double h = h_of(u);
                int m = misses;
                for (std::uint32_t rest = open_times; rest && m <= allowed_; rest &= rest - 1)
                    m += in_O(std::countr_zero(rest), h);
                if (m <= allowed_) mark(u, runs, marked);
            }
            return;
        }
        const std::uint64_t M = boxes_[level + 1];
        const double Md = static_cast<double>(M);
        auto child = static_cast<std::uint64_t>(std::max(0.0, std::floor(u_lo * Md) - 1.0));
        for (; child < M && static_cast<double>(child) / Md < u_hi; ++child) {
            const double lo = std::max(static_cast<double>(child) / Md, u_lo);
            const double hi = std::min(static_cast<double>(child + 1) / Md, u_hi);
            if (lo < hi) visit(level + 1, child, lo, hi, runs, marked);
        }
    }

    /// Marks every sample with u in [u_lo, u_hi). Finest boxes cut by the ends
    /// are checked sample by sample; whole boxes in between are marked in bulk,
    /// and since a coarser box spans more than two finest ones, the boxes they
    /// meet at each level form one contiguous range.
    void mark_interval(double u_lo, double u_hi, std::vector<LevelRun>& runs, std::uint64_t& marked) const {
        const std::uint64_t M = finest();
        const double Md = static_cast<double>(M);
        const auto j0 = static_cast<std::uint64_t>(std::max(0.0, std::floor(u_lo * Md) - 1.0));
        auto samples_of = [&](std::uint64_t j) {
            for (std::uint64_t g = 0; g < gpb_; ++g) {
                const double u = sample_u(j, g);
                if (u >= u_lo && u < u_hi) mark(u, runs, marked);
            }
        };
        std::uint64_t j = j0;
        // leading boxes not entirely inside the interval
        for (; j < M && static_cast<double>(j) / Md < u_hi && sample_u(j, 0) < u_lo; ++j) samples_of(j);
        // first box whose last sample is not below u_hi
        std::uint64_t j1 = std::clamp(static_cast<std::uint64_t>(std::max(0.0, std::floor(u_hi * Md))), j, M);
        while (j1 > j && sample_u(j1 - 1, gpb_ - 1) >= u_hi) --j1;
        while (j1 < M && sample_u(j1, gpb_ - 1) < u_hi) ++j1;
        if (j1 > j) {
            marked += (j1 - j) * gpb_;
            const double ua = sample_u(j, 0), ub = sample_u(j1 - 1, gpb_ - 1);
            for (std::size_t k = 0; k < boxes_.size(); ++k) {
                const double Mk = static_cast<double>(boxes_[k]);
                runs[k].add_range(static_cast<std::int64_t>(std::min(Mk - 1.0, std::floor(ua * Mk))),
                                  static_cast<std::int64_t>(std::min(Mk - 1.0, std::floor(ub * Mk))));
            }
            j = j1;
        }
        for (; j < M && static_cast<double>(j) / Md < u_hi; ++j) samples_of(j);
    }

    void mark(double u, std::vector<LevelRun>& runs, std::uint64_t& marked) const {
        ++marked;
        for (std::size_t k = 0; k < boxes_.size(); ++k) {
            const double M = static_cast<double>(boxes_[k]);
            runs[k].add(static_cast<std::int64_t>(std::min(M - 1.0, std::floor(u * M))));
        }
    }

    template <class Body>
    EscapeCounts count_chunks(Body&& body, std::uint64_t n = 0) const {
        if (n == 0) n = finest();
        const std::size_t chunks = chunk_count(n);
        std::vector<std::vector<LevelRun>> runs(chunks, std::vector<LevelRun>(boxes_.size()));
        std::vector<std::uint64_t> marked(chunks, 0);
        parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) { body(b, e, runs[c], marked[c]); });

        EscapeCounts out;
        out.marked = std::accumulate(marked.begin(), marked.end(), std::uint64_t{0});
        for (std::size_t k = 0; k < boxes_.size(); ++k) {
            // chunks cover increasing u, so a box can only be shared by neighbouring runs
            std::uint64_t total = 0;
            std::int64_t prev_last = -1;
            for (std::size_t c = 0; c < chunks; ++c) {
                const auto& run = runs[c][k];
                if (run.count == 0) continue;
                total += run.count - (run.first == prev_last ? 1 : 0);
                prev_last = run.last;
            }
            out.counts.push_back(total);
        }
        return out;
    }

    const EscapeSampleConfig& cfg_;
    int NT_;
    UnstableOrbit orbit_;
    std::vector<std::uint64_t> boxes_;
    std::uint64_t gpb_ = 4;
    int allowed_ = 0;
    double len_ = 0.0;
};

inline EmpiricalDimReport escape_report(const EscapeSampleConfig& cfg, const HyperbolicMap& hm,
                                        const EscapeSampler& sampler, const EscapeCounts& counts) {
    const int NT = cfg.N * cfg.T;
    EmpiricalDimReport rep;
    rep.tolerance = cfg.tolerance;
    rep.samples = sampler.samples();
    rep.marked = counts.marked;
    rep.counts = counts.counts;
    for (int k = 0; k < cfg.N; ++k) {
        rep.horizons.push_back((k + 1) * cfg.T);
        rep.scales.push_back(sampler.box_length(static_cast<std::size_t>(k)));
    }
    const std::uint64_t final_count = rep.counts.back();
    rep.exponent = final_count == 0 ? -std::numeric_limits<double>::infinity()
                                    : std::log(static_cast<double>(final_count)) / (NT * hm.log_lambda());

    rep.mu_O = cfg.O.measure();
    rep.y5r = std::clamp(sigma_core(cfg.O, 5.0 * cfg.r).measure(), 0.0, 1.0);
    const BoundReport bound = codim_lower(cfg.r, rep.y5r, cfg.delta, cfg.constants);
    rep.theoretical_codim = bound.codim_lower;
    rep.drop_achieved = bound.drop_achieved;
    rep.delta_threshold = rep.y5r > 0.0 ? delta_threshold(rep.y5r).delta_O : 1.0;
    rep.consistent = rep.exponent <= cfg.constants.L - rep.theoretical_codim + cfg.tolerance;
    return rep;
}

} // namespace detail

/// Splits V_r into ceil(lambda^{kT}) boxes at level k = 1..N and places
/// grid_per_box jittered samples in each finest box. A sample is marked when
/// its Birkhoff average of 1_{O^c} over [0, NT) reaches delta; the report
/// counts, at every level, the boxes that contain a marked sample.
inline EmpiricalDimReport sample_escape_set(const EscapeSampleConfig& cfg, const HyperbolicMap& hm) {
    const detail::EscapeSampler sampler(cfg, hm);
    return detail::escape_report(cfg, hm, sampler, sampler.count_pruned());
}

/// Same report without pruning; every sample is followed individually.
inline EmpiricalDimReport sample_escape_set_direct(const EscapeSampleConfig& cfg, const HyperbolicMap& hm) {
    const detail::EscapeSampler sampler(cfg, hm);
    return detail::escape_report(cfg, hm, sampler, sampler.count_direct());
}

} // namespace escape_dim

#pragma once

// Closed-form codimension bounds for sets of points that escape an open set
// on average, together with the time schedule and (z, T) optimisation that
// produce them. Every function here is pure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace escape_dim {

/// Dynamical constants of a model system.
///
/// lambda_min / lambda_max are the extreme eigenvalue exponents of the time-one
/// conjugation on the expanding subgroup, eta its trace exponent and L its
/// dimension. c0 and C1 are the tile-overlap and ball-covering constants, c1/c2
/// bound the Haar density, and (t1, lambda_prime) the equidistribution rate.
struct SystemConstants {
    std::string name = "custom";
    double lambda_min = 1.0;
    double lambda_max = 1.0;
    double eta = 1.0;
    int L = 1;
    double c0 = 0.0;
    double C1 = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;
    double t1 = 1.0;
    double lambda_prime = 1.0;
    double r_prime = 1.0;
    double r0 = 1.0;
    double r1 = 0.5;

    /// Largest admissible radius, half the smaller of r0 and r_prime.
    double r2() const { return 0.5 * std::min(r0, r_prime); }

    void validate() const {
        using detail::require;
        require(lambda_min > 0 && lambda_max > 0, "lambda_min and lambda_max must be positive");
        require(lambda_min <= lambda_max, "lambda_min must not exceed lambda_max");
        require(eta > 0, "eta must be positive");
        require(L >= 1, "L must be a positive integer");
        require(c0 >= 0, "c0 must be non-negative");
        require(C1 >= 1, "C1 must be at least 1");
        require(c1 > 0 && c2 > 0 && c1 <= c2, "need 0 < c1 <= c2");
        require(t1 >= 1, "t1 must be at least 1");
        require(lambda_prime > 0, "lambda_prime must be positive");
        require(r_prime > 0 && r0 > 0 && r1 > 0, "radii must be positive");
    }

    /// Full binary shift: depth-t cylinders are exactly the Bowen boxes.
    static SystemConstants shift() {
        SystemConstants k;
        const double ln2 = std::log(2.0);
        k.name = "shift";
        k.lambda_min = k.lambda_max = k.eta = ln2;
        k.L = 1;
        k.c0 = 0.0;
        k.C1 = 1.0;
        k.c1 = k.c2 = 1.0;
        k.t1 = 1.0;
        k.lambda_prime = ln2;
        k.r_prime = 1.0;
        k.r0 = 1.0;
        k.r1 = k.r2();
        return k;
    }

    /// Linear hyperbolic automorphism of the 2-torus with unstable eigenvalue
    /// lambda_u, in the sup metric. lambda_prime <= 0 means "use ln lambda_u".
    static SystemConstants catmap(double lambda_u = 0.5 * (3.0 + std::sqrt(5.0)),
                                  double lambda_prime = 0.0) {
        SystemConstants k;
        const double rate = std::log(lambda_u);
        k.name = "catmap";
        k.lambda_min = k.lambda_max = k.eta = rate;
        k.L = 1;
        k.c0 = 2.0;
        k.C1 = 1.0;
        k.c1 = k.c2 = 1.0;
        k.t1 = 1.0;
        k.lambda_prime = lambda_prime > 0 ? lambda_prime : rate;
        k.r_prime = 0.5;
        k.r0 = 0.5;
        k.r1 = k.r2();
        return k;
    }
};

/// T_r, T_0 and T of the covering construction, plus the block count N.
struct TimeSchedule {
    double T_r = 0.0;
    double T0 = 1.0;
    double T = 0.0;
    int N = 1;
};

/// Scalar inputs of the bound chain and the quantities derived from them.
struct EscapeParameters {
    double y = 0.0;
    double delta = 1.0;
    double s = 0.0;
    double z = std::numeric_limits<double>::quiet_NaN();
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double r = 0.0;
};

struct ThresholdResult {
    double delta_O = 1.0;
    bool drop_possible = false;
    /// Number of sign changes of s -> phi(y, s) seen on the scan. More than one
    /// means the infimum picked the largest root among several.
    int sign_changes = 0;

    bool multiple_roots() const { return sign_changes > 1; }
};

struct ZStar {
    double z = 0.0;
    double ratio_max = 0.0;
};

struct BoundReport {
    EscapeParameters params;
    SystemConstants constants;
    TimeSchedule schedule;
    double phi_value = 0.0;
    double C_of_T = 0.0;
    double B_of_z = 0.0;
    double dim_upper = 0.0;
    double codim_lower = 0.0;
    bool drop_achieved = false;
};

/// Eventual-escape, ball and delta = 1 comparison bounds, each only up to an
/// absolute multiplicative constant.
struct ReferenceBounds {
    double eventual_escape = 0.0;
    double balls = 0.0;
    double full_escape = 0.0;
};

namespace detail {

// x * ln(1/x) with the convention 0 * ln(1/0) = 0, taken by branch.
inline double xlog_inv(double x) {
    return x == 0.0 ? 0.0 : -x * std::log(x);
}

inline bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

} // namespace detail

inline double phi(double y, double s) {
    detail::require(detail::in_unit(y) && detail::in_unit(s), "phi: arguments must lie in [0,1]");
    const double first = (1.0 - s) * -std::log1p(-0.5 * y);
    const double second = 2.0 * detail::xlog_inv(1.0 - s);
    const double third = s == 0.0 ? 0.0 : s * std::log((1.0 + 0.25 * y) / s);
    return first - second - third;
}

/// Binary entropy base (1/z)^z (1/(1-z))^(1-z); equals 1 at both endpoints.
inline double b_of_z(double z) {
    detail::require(detail::in_unit(z), "b_of_z: z must lie in [0,1]");
    return std::exp(detail::xlog_inv(z) + detail::xlog_inv(1.0 - z));
}

/// inf{delta in (0,1) : phi(y, sqrt(1 - delta)) > 0}, located by a uniform
/// 1024-point scan of s in (0,1) plus both endpoints, then bisection of the
/// largest +/- bracket.
inline ThresholdResult delta_threshold(double y, double tol = 1e-9) {
    detail::require(y > 0.0 && y <= 1.0, "delta_threshold: y must lie in (0,1]");
    detail::require(tol > 0.0 && tol <= 1e-3, "delta_threshold: tol must lie in (0, 1e-3]");

    constexpr int kScan = 1024;
    ThresholdResult out;
    double prev_s = 0.0, prev_f = 0.0;
    double lo = -1.0, hi = -1.0;
    bool any_positive = false;
    for (int i = 0; i <= kScan + 1; ++i) {
        // endpoints s = 0 and s = 1 are included; phi(y, 1) = -ln(1 + y/4) < 0
        const double s = i <= kScan ? static_cast<double>(i) / (kScan + 1) : 1.0;
        const double f = phi(y, s);
        any_positive = any_positive || (f > 0.0 && i <= kScan);
        if (i > 0 && ((prev_f > 0.0) != (f > 0.0))) {
            ++out.sign_changes;
            if (prev_f > 0.0) {
                lo = prev_s;
                hi = s;
            }
        }
        prev_s = s;
        prev_f = f;
    }
    if (!any_positive || lo < 0.0) {
        out.delta_O = 1.0;
        out.drop_possible = false;
        out.sign_changes = 0;
        return out;
    }
    // phi(y, lo) > 0 >= phi(y, hi); in delta = 1 - s^2 the bracket width is hi^2 - lo^2
    while (hi * hi - lo * lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (phi(y, mid) > 0.0) lo = mid;
        else hi = mid;
    }
    if (lo == 0.0) {
        // the positive region lies within tol of delta = 1: no resolvable root
        out.delta_O = 1.0;
        out.drop_possible = false;
        out.sign_changes = 0;
        return out;
    }
    const double s0 = 0.5 * (lo + hi);
    out.delta_O = 1.0 - s0 * s0;
    out.drop_possible = true;
    return out;
}

inline double c_of_T(double T, double y5r, const TimeSchedule& sched, const SystemConstants& k) {
    if (!(T > sched.T_r)) throw ScheduleError("c_of_T: T must exceed T_r");
    detail::require(detail::in_unit(y5r), "c_of_T: y5r must lie in [0,1]");
    return 1.0 - y5r + (sched.T_r + 1.0) / T + k.c0 * std::exp(-k.lambda_min * T);
}

namespace detail {

/// Smallest T0 >= 1 such that c0 * exp(-lambda * T) < 1 / T for every T >= T0.
inline double burn_in_time(double c0, double lambda) {
    if (c0 <= 0.0) return 1.0;
    // g(T) = ln c0 + ln T - lambda T is concave with its peak at 1/lambda
    auto g = [&](double T) { return std::log(c0) + std::log(T) - lambda * T; };
    const double peak = std::max(1.0, 1.0 / lambda);
    if (g(peak) < 0.0) return 1.0;
    double lo = peak, hi = 2.0 * peak;
    while (g(hi) >= 0.0) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) >= 0.0) lo = mid;
        else hi = mid;
    }
    return hi;
}

} // namespace detail

inline TimeSchedule schedule(double r, double y5r, const SystemConstants& k) {
    k.validate();
    detail::require(r > 0.0 && r <= k.r2() * (1.0 + 1e-15), "schedule: r must lie in (0, r2]");
    detail::require(y5r > 0.0 && y5r <= 1.0, "schedule: y5r must lie in (0,1]");

    const double L = k.L;
    const double lp = k.lambda_prime;
    TimeSchedule out;
    out.T_r = std::max({k.t1,
                        std::log(2.0 / r) / lp,
                        (L * std::log(4.0 * std::sqrt(L)) - std::log(k.c1 * lp) - L * std::log(r)) / lp,
                        std::log(8.0) / k.lambda_min});
    out.T0 = detail::burn_in_time(k.c0, k.lambda_min);
    out.T = std::max(8.0 * out.T_r / y5r, out.T0);
    return out;
}

/// Maximiser of z (delta - z) / (1 - z) over (0, delta).
inline ZStar z_star(double delta) {
    detail::require(delta > 0.0 && delta < 1.0, "z_star: delta must lie in (0,1)");
    const double s = std::sqrt(1.0 - delta);
    return {1.0 - s, (1.0 - s) * (1.0 - s)};
}

inline double epsilon_from_z(double z, double delta) {
    detail::require(z > 0.0 && z < delta && delta < 1.0, "epsilon_from_z: need 0 < z < delta < 1");
    return (delta - z) / (1.0 - z);
}

/// Inverse of epsilon_from_z: z = 1 - (1 - delta) / (1 - epsilon).
inline double z_from_epsilon(double epsilon, double delta) {
    detail::require(epsilon > 0.0 && epsilon < delta && delta <= 1.0,
                    "z_from_epsilon: need 0 < epsilon < delta <= 1");
    return 1.0 - (1.0 - delta) / (1.0 - epsilon);
}

/// Upper bound on the Hausdorff dimension of the escape set for one choice of (z, T).
inline double dim_upper(double z, double T, double y5r, double delta, const SystemConstants& k,
                        const TimeSchedule& sched) {
    detail::require(z > 0.0 && z < delta && delta <= 1.0, "dim_upper: need 0 < z < delta");
    const double C = c_of_T(T, y5r, sched, k);
    const double overlap = 1.0 + k.c0 * std::exp(-k.lambda_min * T);
    const double log_term = z * std::log(C * (1.0 - z) / (z * (delta - z))) +
                            (1.0 - z) * std::log(overlap / (1.0 - z));
    return k.L + log_term / (k.lambda_max * T);
}

/// Same bound written with the entropy factor B(z) kept separate.
inline double dim_upper_entropy_form(double z, double T, double y5r, double delta,
                                     const SystemConstants& k, const TimeSchedule& sched) {
    detail::require(z > 0.0 && z < delta && delta <= 1.0, "dim_upper: need 0 < z < delta");
    const double C = c_of_T(T, y5r, sched, k);
    const double overlap = 1.0 + k.c0 * std::exp(-k.lambda_min * T);
    const double log_term = std::log(b_of_z(z)) + z * std::log(C * (1.0 - z) / (delta - z)) +
                            (1.0 - z) * std::log(overlap);
    return k.L + log_term / (k.lambda_max * T);
}

/// Certified codimension drop phi(y, s) / (lambda_max T), clamped at zero, with
/// T from schedule() and z at the closed-form optimum. delta = 1 is accepted:
/// the phi form stays finite there while z* degenerates, so dim_upper is NaN.
inline BoundReport codim_lower(double r, double y5r, double delta, const SystemConstants& k) {
    k.validate();
    detail::require(r > 0.0 && r <= k.r2() / 5.0 * (1.0 + 1e-15), "codim_lower: r must lie in (0, r2/5]");
    detail::require(delta > 0.0 && delta <= 1.0, "codim_lower: delta must lie in (0,1]");
    detail::require(detail::in_unit(y5r), "codim_lower: y5r must lie in [0,1]");

    BoundReport rep;
    rep.constants = k;
    rep.params.y = y5r;
    rep.params.delta = delta;
    rep.params.r = r;
    rep.params.s = std::sqrt(1.0 - delta);
    rep.phi_value = phi(y5r, rep.params.s);

    if (y5r == 0.0) {
        // nothing to certify; the schedule needs y5r > 0
        rep.schedule = {};
        rep.C_of_T = rep.B_of_z = rep.dim_upper = std::numeric_limits<double>::quiet_NaN();
        rep.codim_lower = 0.0;
        rep.drop_achieved = false;
        return rep;
    }

    rep.schedule = schedule(r, y5r, k);
    const double T = rep.schedule.T;
    rep.C_of_T = c_of_T(T, y5r, rep.schedule, k);
    rep.codim_lower = std::max(0.0, rep.phi_value / (k.lambda_max * T));
    rep.drop_achieved = rep.phi_value > 0.0;

    if (delta < 1.0) {
        const ZStar zs = z_star(delta);
        rep.params.z = zs.z;
        rep.params.epsilon = epsilon_from_z(zs.z, delta);
        rep.B_of_z = b_of_z(zs.z);
        rep.dim_upper = dim_upper(zs.z, T, y5r, delta, k, rep.schedule);
    } else {
        rep.B_of_z = rep.dim_upper = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

inline ReferenceBounds reference_bounds(double r, double y_core, double rho, int dimX) {
    detail::require(r > 0.0 && r < 1.0, "reference_bounds: r must lie in (0,1)");
    detail::require(y_core > 0.0 && y_core <= 1.0, "reference_bounds: y_core must lie in (0,1]");
    detail::require(rho > 0.0 && rho < 1.0, "reference_bounds: rho must lie in (0,1)");
    detail::require(dimX >= 1, "reference_bounds: dimX must be positive");
    const double log_inv_r = -std::log(r);
    ReferenceBounds out;
    out.eventual_escape = y_core / (log_inv_r - std::log(y_core));
    out.balls = std::pow(rho, dimX) / -std::log(rho);
    out.full_escape = y_core * -std::log1p(-0.5 * y_core) / log_inv_r;
    return out;
}

} // namespace escape_dim

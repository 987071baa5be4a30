#pragma once

// JSON views of the library types. Non-finite doubles are written as null.

#include <cmath>
#include <string>

#include <json.hpp>

#include "bound_core.hpp"
#include "covering_combinatorics.hpp"
#include "shift_model.hpp"
#include "torus_model.hpp"

namespace escape_dim {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const SystemConstants& k) {
    return {{"name", k.name},       {"lambda_min", k.lambda_min}, {"lambda_max", k.lambda_max},
            {"eta", k.eta},         {"L", k.L},                   {"c0", k.c0},
            {"C1", k.C1},           {"c1", k.c1},                 {"c2", k.c2},
            {"t1", k.t1},           {"lambda_prime", k.lambda_prime},
            {"r_prime", k.r_prime}, {"r0", k.r0},                 {"r1", k.r1}};
}

/// Reads the SystemConstants schema; missing fields keep the given defaults.
inline SystemConstants constants_from_json(const Json& j, SystemConstants base = {}) {
    if (!j.is_object()) throw ConfigError("constants: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        try {
            if (key == "name") base.name = v.get<std::string>();
            else if (key == "lambda_min") base.lambda_min = v.get<double>();
            else if (key == "lambda_max") base.lambda_max = v.get<double>();
            else if (key == "eta") base.eta = v.get<double>();
            else if (key == "L") base.L = v.get<int>();
            else if (key == "c0") base.c0 = v.get<double>();
            else if (key == "C1") base.C1 = v.get<double>();
            else if (key == "c1") base.c1 = v.get<double>();
            else if (key == "c2") base.c2 = v.get<double>();
            else if (key == "t1") base.t1 = v.get<double>();
            else if (key == "lambda_prime") base.lambda_prime = v.get<double>();
            else if (key == "r_prime") base.r_prime = v.get<double>();
            else if (key == "r0") base.r0 = v.get<double>();
            else if (key == "r1") base.r1 = v.get<double>();
            else throw ConfigError("constants: unknown field '" + key + "'");
        } catch (const Json::exception&) {
            throw ConfigError("constants: field '" + key + "' has the wrong type");
        }
    }
    try {
        base.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("constants: ") + e.what());
    }
    return base;
}

inline Json to_json(const TimeSchedule& s) {
    return {{"T_r", num(s.T_r)}, {"T0", num(s.T0)}, {"T", num(s.T)}, {"N", s.N}};
}

inline Json to_json(const EscapeParameters& p) {
    return {{"y", num(p.y)},         {"delta", num(p.delta)}, {"s", num(p.s)},
            {"z", num(p.z)},         {"epsilon", num(p.epsilon)}, {"r", num(p.r)}};
}

inline Json to_json(const ThresholdResult& t) {
    return {{"delta_O", num(t.delta_O)},
            {"drop_possible", t.drop_possible},
            {"sign_changes", t.sign_changes},
            {"multiple_roots", t.multiple_roots()}};
}

inline Json to_json(const BoundReport& b) {
    return {{"params", to_json(b.params)},     {"constants", to_json(b.constants)},
            {"schedule", to_json(b.schedule)}, {"phi", num(b.phi_value)},
            {"C_of_T", num(b.C_of_T)},         {"B_of_z", num(b.B_of_z)},
            {"dim_upper", num(b.dim_upper)},   {"codim_lower", num(b.codim_lower)},
            {"drop_achieved", b.drop_achieved}};
}

inline Json to_json(const ReferenceBounds& r) {
    return {{"eventual_escape", num(r.eventual_escape)}, {"balls", num(r.balls)}, {"full_escape", num(r.full_escape)}};
}

inline Json to_json(const SuiteTally& t) {
    return {{"instances", t.instances}, {"failures", t.failures}, {"passed", t.passed()}};
}

inline Json to_json(const ShiftSweepCell& c) {
    return {{"N", c.N},
            {"T", c.T},
            {"target", c.target},
            {"uppcov", {{"instances", c.uppcov_instances}, {"failures", c.uppcov_failures}, {"max_ratio", num(c.uppcov_max_ratio)}}},
            {"bowen_ball", {{"instances", c.bowen_instances}, {"failures", c.bowen_failures}, {"max_ratio", num(c.bowen_max_ratio)}}}};
}

inline std::string to_string(const Rational& q) {
    return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

inline Json to_json(const Rect& r) { return {{"x0", r.x0}, {"y0", r.y0}, {"w", r.w}, {"h", r.h}}; }

inline Json to_json(const RectUnion& U) {
    Json a = Json::array();
    for (const auto& r : U.rects) a.push_back(to_json(r));
    return a;
}

inline Json to_json(const CoveringCount& c) {
    return {{"t", c.t},
            {"exact", c.exact},
            {"bound", num(c.bound)},
            {"c0_needed", num(c.c0_needed)},
            {"hypothesis_met", c.hypothesis_met},
            {"holds", c.holds}};
}

inline Json to_json(const EquidistributionPoint& p) {
    return {{"t", p.t},
            {"estimate", num(p.estimate)},
            {"standard_error", num(p.standard_error)},
            {"target", num(p.target)},
            {"residual", num(p.residual)}};
}

inline Json to_json(const EmpiricalDimReport& r) {
    Json scales = Json::array(), counts = Json::array(), horizons = Json::array();
    for (double s : r.scales) scales.push_back(num(s));
    for (auto c : r.counts) counts.push_back(c);
    for (int h : r.horizons) horizons.push_back(h);
    return {{"horizons", horizons},
            {"scales", scales},
            {"counts", counts},
            {"exponent", num(r.exponent)},
            {"theoretical_codim", num(r.theoretical_codim)},
            {"tolerance", num(r.tolerance)},
            {"consistent", r.consistent},
            {"mu_O", num(r.mu_O)},
            {"y5r", num(r.y5r)},
            {"delta_threshold", num(r.delta_threshold)},
            {"drop_achieved", r.drop_achieved},
            {"samples", r.samples},
            {"marked", r.marked},
            {"empirical", true}};
}

} // namespace escape_dim

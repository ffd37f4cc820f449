#include "robustutil/utility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "robustutil/errors.hpp"

namespace robustutil {
namespace {

constexpr double kRootLo = 1e-300;
constexpr double kRootHi = 1e300;
constexpr int kBisectionSteps = 80;
constexpr int kNewtonPolishes = 5;

enum class BracketOutcome { Found, BelowRange, AboveRange };

struct Bracket {
    BracketOutcome outcome = BracketOutcome::Found;
    double lo = 0.0;
    double hi = 0.0;
};

// g is increasing on (0, inf). Doubles away from x = 1 until g changes sign.
template <class G>
Bracket bracket_by_doubling(const G& g) {
    Bracket br;
    if (g(1.0) < 0.0) {
        double lo = 1.0;
        double hi = 2.0;
        while (g(hi) < 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > kRootHi) {
                br.outcome = BracketOutcome::AboveRange;
                return br;
            }
        }
        br.lo = lo;
        br.hi = hi;
    } else {
        double hi = 1.0;
        double lo = 0.5;
        while (g(lo) > 0.0) {
            hi = lo;
            lo *= 0.5;
            if (lo < kRootLo) {
                br.outcome = BracketOutcome::BelowRange;
                return br;
            }
        }
        br.lo = lo;
        br.hi = hi;
    }
    return br;
}

// Bisection then guarded Newton polish on an increasing g with derivative dg.
template <class G, class DG>
double refine_root(const G& g, const DG& dg, double lo, double hi) {
    for (int i = 0; i < kBisectionSteps; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    double gx = g(x);
    for (int i = 0; i < kNewtonPolishes && gx != 0.0; ++i) {
        const double slope = dg(x);
        if (!(std::isfinite(slope) && slope > 0.0)) break;
        const double next = x - gx / slope;
        if (!(next >= lo && next <= hi)) break;
        const double gn = g(next);
        if (!(std::abs(gn) < std::abs(gx))) break;
        x = next;
        gx = gn;
    }
    return x;
}

void require_positive(double y, const char* what) {
    if (!(y > 0.0)) {
        std::ostringstream os;
        os << what << ": argument must be > 0 (got " << y << ")";
        throw DomainError(os.str());
    }
}

}  // namespace

UtilityFunction UtilityFunction::power(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("power utility requires alpha in (0, 1)");
    }
    return UtilityFunction(PowerFamily{alpha});
}

UtilityFunction UtilityFunction::custom(CustomUtility spec) {
    if (!spec.value || !spec.marginal) {
        throw ValidationError("custom utility needs both U and U'");
    }
    if (!std::isfinite(spec.value_at_zero)) {
        throw ValidationError("custom utility must be bounded below (finite U(0+))");
    }
    if (!(spec.upper_limit > spec.value_at_zero)) {
        throw ValidationError("custom utility: upper limit must exceed U(0+)");
    }
    UtilityFunction uf(NormalizedCustom{std::move(spec)});
    const auto shape = check_utility_shape(uf);
    if (!shape.increasing) throw ValidationError("custom utility is not strictly increasing");
    if (!shape.concave) throw ValidationError("custom utility is not strictly concave");
    return uf;
}

UtilityFunction UtilityFunction::parse(std::string_view spec) {
    constexpr std::string_view prefix = "power:";
    if (spec.substr(0, prefix.size()) != prefix) {
        throw ParseError("utility spec must look like power:<alpha>, got '" + std::string(spec) +
                         "'");
    }
    const std::string number(spec.substr(prefix.size()));
    std::size_t used = 0;
    double alpha = 0.0;
    try {
        alpha = std::stod(number, &used);
    } catch (const std::exception&) {
        throw ParseError("utility spec: cannot parse alpha from '" + number + "'");
    }
    if (used != number.size()) {
        throw ParseError("utility spec: trailing characters in '" + number + "'");
    }
    return power(alpha);
}

double UtilityFunction::alpha() const {
    if (const auto* p = std::get_if<PowerFamily>(&family_)) return p->alpha;
    throw DomainError("alpha() requested for a non-power utility");
}

std::string UtilityFunction::describe() const {
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        std::ostringstream os;
        os.precision(17);
        os << "power:" << p->alpha;
        return os.str();
    }
    return "custom";
}

double UtilityFunction::value(double x) const {
    if (x < 0.0) throw DomainError("U: wealth must be >= 0");
    if (x == 0.0) return 0.0;
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return std::pow(x, p->alpha) / p->alpha;
    }
    const auto& c = std::get<NormalizedCustom>(family_).spec;
    return c.value(x) - c.value_at_zero;
}

double UtilityFunction::marginal(double x) const {
    if (x < 0.0) throw DomainError("U': wealth must be >= 0");
    if (x == 0.0) return kInf;
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return std::pow(x, p->alpha - 1.0);
    }
    return std::get<NormalizedCustom>(family_).spec.marginal(x);
}

double UtilityFunction::curvature(double x) const {
    require_positive(x, "U''");
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return (p->alpha - 1.0) * std::pow(x, p->alpha - 2.0);
    }
    const auto& c = std::get<NormalizedCustom>(family_).spec;
    if (c.curvature) return c.curvature(x);
    const double h = 1e-5 * x;
    return (c.marginal(x + h) - c.marginal(x - h)) / (2.0 * h);
}

double UtilityFunction::marginal_inverse(double y) const {
    require_positive(y, "(U')^{-1}");
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return std::pow(y, -1.0 / (1.0 - p->alpha));
    }
    const auto& c = std::get<NormalizedCustom>(family_).spec;
    const auto g = [&](double x) { return y - c.marginal(x); };
    const auto dg = [&](double x) { return -curvature(x); };
    const Bracket br = bracket_by_doubling(g);
    if (br.outcome != BracketOutcome::Found) {
        std::ostringstream os;
        os << "(U')^{-1}(" << y << "): no bracket within [1e-300, 1e300]";
        throw ConvergenceError(os.str());
    }
    return refine_root(g, dg, br.lo, br.hi);
}

double UtilityFunction::inverse(double u) const {
    if (u < 0.0) throw DomainError("U^{-1}: argument must be >= 0");
    if (u == 0.0) return 0.0;
    if (u >= upper_limit()) return kInf;
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return std::pow(p->alpha * u, 1.0 / p->alpha);
    }
    const auto g = [&](double x) { return value(x) - u; };
    const auto dg = [&](double x) { return marginal(x); };
    const Bracket br = bracket_by_doubling(g);
    if (br.outcome == BracketOutcome::AboveRange) return kInf;
    if (br.outcome == BracketOutcome::BelowRange) return 0.0;
    return refine_root(g, dg, br.lo, br.hi);
}

double UtilityFunction::inverse_prime(double u) const {
    if (u < 0.0) throw DomainError("(U^{-1})': argument must be >= 0");
    if (u >= upper_limit()) return kInf;
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return std::pow(p->alpha * u, 1.0 / p->alpha - 1.0);
    }
    if (u == 0.0) return 0.0;
    const double x = inverse(u);
    if (x == 0.0) return 0.0;
    return 1.0 / marginal(x);
}

double UtilityFunction::inverse_second(double u) const {
    if (u < 0.0) throw DomainError("(U^{-1})'': argument must be >= 0");
    if (u >= upper_limit()) return kInf;
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        return (1.0 - p->alpha) * std::pow(p->alpha * u, 1.0 / p->alpha - 2.0);
    }
    if (u == 0.0) return 0.0;
    const double x = inverse(u);
    if (x == 0.0) return 0.0;
    const double m = marginal(x);
    return -curvature(x) / (m * m * m);
}

double UtilityFunction::conjugate(double y) const {
    require_positive(y, "V");
    if (const auto* p = std::get_if<PowerFamily>(&family_)) {
        const double a = p->alpha;
        return (1.0 - a) / a * std::pow(y, -a / (1.0 - a));
    }
    const double x = marginal_inverse(y);
    return value(x) - x * y;
}

double UtilityFunction::upper_limit() const {
    if (std::holds_alternative<PowerFamily>(family_)) return kInf;
    const auto& c = std::get<NormalizedCustom>(family_).spec;
    return c.upper_limit - c.value_at_zero;
}

double conjugate_v(const UtilityFunction& uf, double y) { return uf.conjugate(y); }

double u_inverse(const UtilityFunction& uf, double u) { return uf.inverse(u); }

double u_inverse_prime(const UtilityFunction& uf, double u) { return uf.inverse_prime(u); }

double gamma_star(const UtilityFunction& uf, double y, double z) {
    if (z < 0.0 || y < 0.0) return kInf;
    if (z == 0.0) return 0.0;
    if (y == 0.0) {
        const double limit = uf.upper_limit();
        return is_pos_inf(limit) ? kInf : z * limit;
    }
    if (uf.is_power()) {
        // z V(y/z) = c z^{1/(1-a)} y^{-a/(1-a)}, evaluated in logs to avoid
        // overflow of V(y/z) as z -> 0.
        const double a = uf.alpha();
        const double c = (1.0 - a) / a;
        return c * std::exp(std::log(z) / (1.0 - a) - a / (1.0 - a) * std::log(y));
    }
    const double ratio = y / z;
    if (z < 1e-12 && !(ratio < 1e300)) {
        // z V(y/z) -> z U(0+) = 0.
        return 0.0;
    }
    return z * uf.conjugate(ratio);
}

double gamma(const UtilityFunction& uf, double y, double x) {
    if (y == 0.0) return 0.0;
    const double inv = uf.inverse(std::abs(x));
    if (is_pos_inf(inv)) return kInf;
    return y * inv;
}

Delta2Report check_delta2(const UtilityFunction& uf, const Delta2Constants& c,
                          std::span<const double> grid) {
    if (grid.empty()) throw DomainError("check_delta2: empty grid");
    Delta2Report r;
    r.constants_admissible = c.strictly_positive();
    r.holds_V = true;
    r.holds_Uinv = true;
    for (const double y : grid) {
        require_positive(y, "check_delta2 grid");
        const double lhs_v = uf.conjugate(0.5 * y);
        const double rhs_v = c.a * uf.conjugate(y) + c.b * (y + 1.0);
        const double slack_v = rhs_v - lhs_v;
        r.worst_slack_V = std::min(r.worst_slack_V, slack_v);
        if (slack_v < -1e-12 * (1.0 + std::abs(lhs_v))) r.holds_V = false;

        const double lhs_u = uf.inverse(2.0 * y);
        const double rhs_u = c.k * uf.inverse(y) + c.d;
        const double slack_u = is_pos_inf(lhs_u) ? -kInf : rhs_u - lhs_u;
        r.worst_slack_Uinv = std::min(r.worst_slack_Uinv, slack_u);
        if (!(slack_u >= -1e-12 * (1.0 + std::abs(lhs_u)))) r.holds_Uinv = false;
    }
    r.worst_slack = std::min(r.worst_slack_V, r.worst_slack_Uinv);
    return r;
}

Delta2Fit fit_delta2(const UtilityFunction& uf, std::span<const double> grid) {
    if (grid.empty()) throw DomainError("fit_delta2: empty grid");
    Delta2Fit fit;
    for (const double y : grid) {
        require_positive(y, "fit_delta2 grid");
        fit.a = std::max(fit.a, uf.conjugate(0.5 * y) / uf.conjugate(y));
        fit.k = std::max(fit.k, uf.inverse(2.0 * y) / uf.inverse(y));
    }
    return fit;
}

ElasticityReport asymptotic_elasticity(const UtilityFunction& uf, std::span<const double> probes) {
    if (probes.empty()) throw DomainError("asymptotic_elasticity: no probes");
    for (std::size_t i = 1; i < probes.size(); ++i) {
        if (!(probes[i] > probes[i - 1])) {
            throw DomainError("asymptotic_elasticity: probes must be increasing");
        }
    }
    if (probes.back() < 1e6) {
        throw DomainError("asymptotic_elasticity: largest probe must be >= 1e6");
    }
    ElasticityReport r;
    r.value = -kInf;
    for (const double x : probes) {
        if (x < 1e6) continue;
        const double u = uf.value(x);
        if (!(u > 0.0)) throw DomainError("asymptotic_elasticity: U(x) <= 0 at a probe");
        r.value = std::max(r.value, x * uf.marginal(x) / u);
    }
    r.below_one = r.value < 1.0;
    return r;
}

UtilityShapeReport check_utility_shape(const UtilityFunction& uf) {
    UtilityShapeReport r;
    const auto grid = logspace(1e-6, 1e6, 121);
    r.increasing = true;
    r.concave = true;
    double prev_slope = kInf;
    double prev_value = uf.value(grid[0]);
    bool prev_resolved = true;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double v = uf.value(grid[i]);
        // Bounded utilities saturate in double precision; strictness is only
        // demanded where the increment U'(x) dx is above rounding.
        const double expected = uf.marginal(grid[i]) * (grid[i] - grid[i - 1]);
        const bool resolved = expected > 1e-10 * (1.0 + std::abs(v));
        if (v < prev_value || (resolved && !(v > prev_value))) r.increasing = false;
        const double slope = (v - prev_value) / (grid[i] - grid[i - 1]);
        if (resolved && prev_resolved ? !(slope < prev_slope) : slope > prev_slope) r.concave = false;
        prev_slope = slope;
        prev_value = v;
        prev_resolved = resolved;
    }
    const double m1 = uf.marginal(1.0);
    r.inada_at_zero = uf.marginal(1e-100) > 1e6 * m1;
    r.inada_at_infinity = uf.marginal(1e100) < 1e-6 * m1;
    r.value_near_zero = uf.value(1e-12);
    return r;
}

}  // namespace robustutil

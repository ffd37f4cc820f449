#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "robustutil/numeric.hpp"

namespace robustutil {

/// Power utility U(x) = x^alpha / alpha, alpha in (0, 1).
struct PowerFamily {
    double alpha = 0.5;
};

/// A user-supplied utility on (0, inf). Only U and U' are required; the
/// inverse, the marginal inverse and the conjugate are obtained by root
/// solving. `value_at_zero` is U(0+) as declared by the caller: the utility is
/// shifted by it so that the normalized U satisfies U(0+) = 0.
struct CustomUtility {
    std::function<double(double)> value;
    std::function<double(double)> marginal;
    /// Optional U''. A central difference of U' is used when empty.
    std::function<double(double)> curvature;
    double value_at_zero = 0.0;
    /// lim_{x->inf} U(x) before normalization; +inf for unbounded utilities.
    double upper_limit = kInf;
};

/// Strictly increasing, strictly concave C^1 utility together with the
/// derived maps used throughout the solver:
///
///   U, U', U''                    value / marginal / curvature
///   I = (U')^{-1}                 marginal_inverse
///   U^{-1}, (U^{-1})', (U^{-1})'' inverse / inverse_prime / inverse_second
///   V(y) = sup_x [U(x) - x y]     conjugate, with V' = -I
///
/// Instances are immutable and may be shared across threads.
class UtilityFunction {
public:
    static UtilityFunction power(double alpha);
    /// Validates monotonicity and concavity on a probe grid; throws
    /// ValidationError when either fails.
    static UtilityFunction custom(CustomUtility spec);
    /// Parses the CLI form `power:<alpha>`.
    static UtilityFunction parse(std::string_view spec);

    bool is_power() const { return std::holds_alternative<PowerFamily>(family_); }
    /// Throws DomainError for non-power utilities.
    double alpha() const;
    std::string describe() const;

    double value(double x) const;
    double marginal(double x) const;
    double curvature(double x) const;
    double marginal_inverse(double y) const;

    /// U^{-1}(u); +inf when u >= sup U. DomainError for u < 0.
    double inverse(double u) const;
    double inverse_prime(double u) const;
    double inverse_second(double u) const;

    /// V(y) for y > 0; DomainError otherwise.
    double conjugate(double y) const;
    double conjugate_prime(double y) const { return -marginal_inverse(y); }

    /// Delta = lim_{x->inf} U(x) (normalized); +inf for the power family.
    double upper_limit() const;

private:
    struct NormalizedCustom {
        CustomUtility spec;
    };
    using Family = std::variant<PowerFamily, NormalizedCustom>;

    explicit UtilityFunction(Family family) : family_(std::move(family)) {}

    Family family_;
};

/// V(y) = sup_{x>0} [U(x) - x y].
double conjugate_v(const UtilityFunction& uf, double y);
double u_inverse(const UtilityFunction& uf, double u);
double u_inverse_prime(const UtilityFunction& uf, double u);

/// gamma*_y(z) = z V(y/z) for z > 0, 0 at z = 0, +inf for z < 0. The 0/0 = 0
/// convention gives gamma*_0(z) = z * sup U. Negative y is outside the
/// domain and maps to +inf.
double gamma_star(const UtilityFunction& uf, double y, double z);

/// gamma_y(x) = y U^{-1}(|x|), the convex conjugate of gamma*_y(|.|).
double gamma(const UtilityFunction& uf, double y, double x);

/// Constants of the doubling conditions
///   V(y/2)    <= a V(y) + b (y + 1)
///   U^-1(2y)  <= k U^-1(y) + d.
/// The growth assumption requires all four strictly positive; the checker
/// also accepts zeros so that sharper (failing) constants can be probed.
struct Delta2Constants {
    double a = 0.0;
    double b = 0.0;
    double k = 0.0;
    double d = 0.0;

    bool strictly_positive() const { return a > 0 && b > 0 && k > 0 && d > 0; }
};

struct Delta2Report {
    bool holds_V = false;
    bool holds_Uinv = false;
    double worst_slack_V = kInf;
    double worst_slack_Uinv = kInf;
    double worst_slack = kInf;
    bool constants_admissible = false;
};

Delta2Report check_delta2(const UtilityFunction& uf, const Delta2Constants& c,
                          std::span<const double> grid);

/// Smallest multiplicative constants with b = d = 0 on the grid:
/// a = max V(y/2)/V(y), k = max U^-1(2y)/U^-1(y).
struct Delta2Fit {
    double a = 0.0;
    double k = 0.0;
};

Delta2Fit fit_delta2(const UtilityFunction& uf, std::span<const double> grid);

struct ElasticityReport {
    double value = 0.0;
    bool below_one = false;
};

/// max of x U'(x) / U(x) over the probes x >= 1e6.
ElasticityReport asymptotic_elasticity(const UtilityFunction& uf, std::span<const double> probes);

/// Shape diagnostics on a fixed log grid. The INADA probes compare U' at
/// 1e-100 and 1e100 with U'(1); they are reported, not enforced, since any
/// finite probe misses power utilities with alpha close to 1.
struct UtilityShapeReport {
    bool increasing = false;
    bool concave = false;
    bool inada_at_zero = false;
    bool inada_at_infinity = false;
    double value_near_zero = 0.0;
};

UtilityShapeReport check_utility_shape(const UtilityFunction& uf);

}  // namespace robustutil

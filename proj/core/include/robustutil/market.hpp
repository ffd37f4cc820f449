#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace robustutil {

/// Observable flagged as a traded price: its expectation under the reference
/// (martingale) measure must equal `initial_value` within `tolerance`.
struct PriceObservable {
    double initial_value = 0.0;
    double tolerance = 0.0;
};

/// Finite probability space under the reference martingale measure, with
/// named observables h(omega_i). Immutable after construction.
class FiniteMarket {
public:
    using ObservableMap = std::map<std::string, std::vector<double>, std::less<>>;
    using PriceMap = std::map<std::string, PriceObservable, std::less<>>;

    /// Probabilities below this value are rejected rather than renormalized.
    static constexpr double kMinProbability = 1e-14;

    /// Validates every invariant; throws ValidationError naming the failure.
    /// Quadrature generators pass a smaller `min_probability` because their
    /// tail weights are legitimately far below kMinProbability.
    FiniteMarket(std::vector<double> probs, ObservableMap observables, PriceMap prices = {},
                 double min_probability = kMinProbability);

    std::size_t size() const { return probs_.size(); }
    std::span<const double> probs() const { return probs_; }

    bool has_observable(std::string_view id) const;
    /// Throws ValidationError for unknown ids.
    std::span<const double> observable(std::string_view id) const;
    const ObservableMap& observables() const { return observables_; }
    const PriceMap& price_observables() const { return prices_; }

private:
    std::vector<double> probs_;
    ObservableMap observables_;
    PriceMap prices_;
};

enum class ConstraintKind { GE, EQ };

/// Moment constraint E[Z h] >= bound (GE) or E[Z h] = bound (EQ).
struct Constraint {
    std::string observable;
    ConstraintKind kind = ConstraintKind::GE;
    double bound = 0.0;
};

/// Uncertainty polytope {Z >= 0, E[Z] = 1, moment constraints} as a list.
struct ConstraintSet {
    std::vector<Constraint> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    /// Ids must resolve in the market and at most n-1 EQ constraints are allowed.
    void validate(const FiniteMarket& market) const;
};

/// Constraints with observables looked up: one row h_lambda per constraint.
struct ResolvedConstraints {
    std::vector<std::vector<double>> rows;
    std::vector<double> bounds;
    std::vector<ConstraintKind> kinds;

    std::size_t size() const { return rows.size(); }
};

ResolvedConstraints resolve_constraints(const FiniteMarket& market, const ConstraintSet& constraints);

/// Black-Scholes terminal price S_T = s0 exp(-sigma^2 T / 2 + sigma W_T).
struct LognormalSpec {
    double sigma = 0.0;
    double T = 0.0;
    double s0 = 1.0;
    int nodes = 64;

    void validate() const;
};

/// Gauss-Hermite rule for the standard normal law: nodes x_i and weights
/// w_i > 0 with sum w_i = 1 and sum w_i f(x_i) ~ E[f(N(0,1))].
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussHermiteRule gauss_hermite_rule(int n);

/// Discretizes S_T on a Gauss-Hermite grid. The generated observable is
/// "S_T", flagged as a price with the quadrature error as its tolerance.
FiniteMarket gauss_hermite_market(const LognormalSpec& spec);

/// sum_i p_i v_i with compensated summation in state order. Throws
/// ValidationError on a length mismatch or a non-finite value.
double expectation(const FiniteMarket& market, std::span<const double> values);

struct FeasibilityReport {
    bool feasible = false;
    /// Only meaningful when the check was run with strict = true.
    bool strictly_feasible = false;
    /// A density in the polytope; the most interior one found when strict.
    std::optional<std::vector<double>> witness;
    /// Largest t with Z_i >= t and GE slack >= t (1 + |a|).
    double interior_margin = 0.0;
};

/// Default slack for strict feasibility, scaled by (1 + |a_lambda|).
inline constexpr double kStrictSlack = 1e-9;

/// Decides whether the constraint polytope is nonempty by a two-phase simplex.
/// With strict = true the witness must also have Z_i > 0 and GE slack of at
/// least kStrictSlack (1 + |a|); this is the computable stand-in for the
/// intrinsic-core qualification.
FeasibilityReport feasibility_check(const FiniteMarket& market, const ConstraintSet& constraints,
                                    bool strict);

}  // namespace robustutil

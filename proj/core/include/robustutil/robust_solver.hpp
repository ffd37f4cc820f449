#pragma once

#include <span>
#include <vector>

#include "robustutil/dual_solver.hpp"
#include "robustutil/market.hpp"
#include "robustutil/utility.hpp"

namespace robustutil {

struct VCurvePoint {
    double y = 0.0;
    double v = 0.0;
};

struct VCurve {
    std::vector<VCurvePoint> points;
    /// Discrete convexity (nondecreasing slopes) and monotone decrease,
    /// each with a 1e-9 relative slack.
    bool convex = true;
    bool decreasing = true;
};

/// v(y) at each grid point. Errors from a point are rethrown with the
/// offending y prepended to the message.
VCurve dual_value_curve(const FiniteMarket& market, const ConstraintSet& constraints,
                        const UtilityFunction& uf, std::span<const double> y_grid,
                        const DualOptions& opts = {}, unsigned threads = 1);

struct ClassicalSolution {
    double u_Q = 0.0;
    double y_Q = 0.0;
    std::vector<double> X_Q;
};

/// Single-model value u_Q(x) = sup{E[Z U(X)] : E[X] <= x}. The budget
/// multiplier is found by bisection in log y.
ClassicalSolution classical_u_Q(const FiniteMarket& market, const UtilityFunction& uf,
                                std::span<const double> q_density, double x);

struct RobustOptions {
    DualOptions dual;
    double y0 = 1.0;
    double y_min = 1e-8;
    double y_max = 1e8;
    /// Relative width of the final golden-section bracket in y.
    double rel_width = 1e-8;
};

struct RobustDiagnostics {
    /// |E[X] - x| / x.
    double budget_residual = 0.0;
    double normalization_residual = 0.0;
    /// |E[Z U(X)] - u| / max(1, |u|).
    double worst_case_value_residual = 0.0;
    /// |u - v(y) - x y| / max(1, |u|).
    double identity_residual = 0.0;
    /// classical_u_Q(Z_hat) - u.
    double saddle_gap = 0.0;
    /// min over y_hat (1 +- 1e-3) of v(y) + x y - u; >= 0 at a minimizer.
    double superdifferential_margin = 0.0;
    /// Spread of v + x y across the final bracket.
    double bracket_flatness = 0.0;
    KktResiduals kkt;
    int dual_solves = 0;
    int iterations = 0;
    bool invariants_hold = false;
};

struct RobustSolution {
    double x = 0.0;
    double y_hat = 0.0;
    double u_value = 0.0;
    double v_at_y_hat = 0.0;
    std::vector<double> Z_hat;
    std::vector<double> X_hat;
    DualPoint dual_point;
    RobustDiagnostics diagnostics;
};

/// u(x) = min_y v(y) + x y with the worst-case density and optimal wealth.
/// Throws BracketFailure when no interior minimum exists in [y_min, y_max].
RobustSolution solve_robust(const FiniteMarket& market, const ConstraintSet& constraints,
                            const UtilityFunction& uf, double x, const RobustOptions& opts = {});

}  // namespace robustutil

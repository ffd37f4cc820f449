#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "robustutil/market.hpp"
#include "robustutil/utility.hpp"

namespace robustutil {

/// Multipliers of the finite dual program: one g per constraint (>= 0 for
/// GE, free for EQ) and beta for the normalization E[Z] = 1.
struct DualPoint {
    std::vector<double> g;
    double beta = 0.0;
};

struct KktResiduals {
    /// Norm of the natural residual P(theta + grad) - theta.
    double grad_norm = 0.0;
    double normalization_residual = 0.0;
    /// a - E[Z h] clipped at 0 for GE rows, |E[Z h] - a| for EQ rows.
    std::vector<double> constraint_residuals;
    /// |g (E[Z h] - a)| per row.
    std::vector<double> complementarity_residuals;

    double max_residual() const;
};

struct DualSolution {
    DualPoint point;
    /// v(y).
    double value = 0.0;
    /// Density Z_i = y (U^-1)'((w_i)+).
    std::vector<double> Z;
    KktResiduals kkt;
    int iterations = 0;
    bool converged = false;
};

struct DualOptions {
    double tol = 1e-9;
    int max_iter = 2000;
    int multistarts = 4;
    std::uint64_t seed = 42;
    /// Newton refinement on the free set using the exact Hessian.
    bool newton = true;
    bool require_strict_feasibility = true;
    /// Throw NonConvergence when the best run misses the KKT thresholds.
    bool throw_on_nonconvergence = true;
    std::optional<DualPoint> warm_start;
    unsigned threads = 1;
};

struct DualObjective {
    /// -inf when some w_i reaches sup U for a bounded utility.
    double value = 0.0;
    /// d/dg_1, ..., d/dg_m, d/dbeta.
    std::vector<double> gradient;
};

/// F(g, beta) = sum g a + beta - y E[U^-1(w+)] with w = beta + sum g h.
DualObjective dual_objective(const FiniteMarket& market, const ConstraintSet& constraints,
                             const UtilityFunction& uf, double y, const DualPoint& p);

/// Maximizes F over the multiplier cone and recovers the primal density.
/// Throws InfeasibleModel, UnboundedDual or NonConvergence.
DualSolution solve_dual(const FiniteMarket& market, const ConstraintSet& constraints,
                        const UtilityFunction& uf, double y, const DualOptions& opts = {});

struct PrimalOracleOptions {
    int starts = 100;
    std::uint64_t seed = 42;
    /// Dense sweep of the normalized simplex for n <= 4 (GE constraints only).
    bool grid = true;
};

struct PrimalOracleResult {
    double value = kInf;
    std::vector<double> Z;
    double barrier_value = kInf;
    /// +inf when the sweep did not run.
    double grid_value = kInf;
};

/// Minimizes E[gamma*_y(Z)] over {Z >= 0, E[Z] = 1, constraints} directly.
/// Throws DimensionGuard for n > 12 and InfeasibleModel for an empty polytope.
PrimalOracleResult primal_brute_force(const FiniteMarket& market, const ConstraintSet& constraints,
                                      const UtilityFunction& uf, double y,
                                      const PrimalOracleOptions& opts = {});

struct OptimalityReport {
    /// (i) normalization, sign and constraint feasibility of Z.
    double feasibility = 0.0;
    /// (ii) complementary slackness and multiplier signs.
    double complementarity = 0.0;
    /// (iii) max_i |Z_i - y (U^-1)'((w_i)+)|.
    double pointwise = 0.0;

    double max_residual() const;
};

OptimalityReport verify_optimality(const FiniteMarket& market, const ConstraintSet& constraints,
                                   const UtilityFunction& uf, double y, const DualSolution& sol);

/// Density Z_i = y (U^-1)'((w_i)+) for a multiplier point.
std::vector<double> density_from_point(const FiniteMarket& market,
                                       const ConstraintSet& constraints,
                                       const UtilityFunction& uf, double y, const DualPoint& p);

}  // namespace robustutil

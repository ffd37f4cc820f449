#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robustutil/dual_solver.hpp"
#include "robustutil/market.hpp"
#include "robustutil/robust_solver.hpp"
#include "robustutil/utility.hpp"

namespace robustutil {

/// Lognormal market with the single constraint E[Z S_T] >= A and utility
/// U(x) = 2 sqrt(x). Closed forms need exp(sigma^2 T) > A / s0 > 1.
struct BSOracle {
    double sigma = 0.5;
    double T = 1.0;
    double A = 1.1;
    double x = 1.0;
    double s0 = 1.0;

    /// Throws DomainError outside the explicit-solution regime.
    void validate() const;
};

struct BSClosedForm {
    BSOracle oracle;
    /// exp(sigma^2 T).
    double growth = 0.0;
    /// K = 1 + (A' - 1)^2 / (growth - 1) with A' = A / s0.
    double K = 0.0;
    double u = 0.0;
    double y_hat = 0.0;

    double v(double y) const { return K / y; }
    /// Dual optimizer at level y: g for E[Z S_T] >= A and beta.
    DualPoint dual_at(double y) const;
    double Z_hat(double s) const;
    double X_hat(double s) const;
};

BSClosedForm bs_closed_form(const BSOracle& o);
LognormalSpec bs_market_spec(const BSOracle& o, int nodes);
ConstraintSet bs_constraints(const BSOracle& o);

struct ComparisonRow {
    std::string quantity;
    double computed = 0.0;
    double expected = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct BSVerification {
    BSClosedForm closed_form;
    RobustSolution solution;
    std::vector<ComparisonRow> rows;
    int nodes = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

/// 1e-3 below 256 nodes, 1e-4 from 256 on.
double bs_default_tolerance(int nodes);

/// Solves the quadrature market and compares u, y_hat, v(y_hat), the dual
/// point and the pointwise Z_hat and X_hat with the closed forms.
BSVerification verify_bs(const BSOracle& o, int nodes, double rel_tol,
                         const RobustOptions& opts = {});

struct MinimaxOptions {
    int multistarts = 200;
    int max_iter = 2000;
    std::uint64_t seed = 42;
    bool grid = true;
    double grid_step = 1e-3;
    double tol = 1e-4;
    unsigned threads = 1;
};

struct MinimaxResult {
    /// max over {X >= 0, E[X] <= x} of min_j E[Z_j U(X)].
    double sup_inf = 0.0;
    /// Best value of the supergradient ascent alone.
    double ascent_sup_inf = 0.0;
    /// Dense grid value over the budget simplex: step grid_step for n <= 3,
    /// at least 5e-3 for n = 4.
    std::optional<double> grid_sup_inf;
    /// min over the convex hull of the densities of u_Q(x).
    double inf_sup = 0.0;
    /// min over the generating densities of u_Q(x).
    double vertex_inf_sup = 0.0;
    std::vector<double> hull_weights;
    double gap = 0.0;
    std::vector<double> X_star;
    std::size_t j_star = 0;
    bool saddle = false;
};

/// Both sides of the minimax identity on a finite market with the
/// uncertainty set conv{Z_1, ..., Z_k}. Guards: k >= 1, and n <= 8 unless k = 1.
MinimaxResult minimax_check(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                            const UtilityFunction& uf, double x, const MinimaxOptions& opts = {});

struct SandwichRow {
    std::size_t density = 0;
    double x = 0.0;
    double luxemburg = 0.0;
    double amemiya = 0.0;
    double u_Q = 0.0;
    /// (1 + x) |Z|^l - u_Q.
    double upper_margin = 0.0;
    /// u_Q - min(1, x) |Z|^a.
    double lower_margin = 0.0;
    bool holds = false;
};

struct SandwichReport {
    std::vector<SandwichRow> rows;
    std::size_t violations = 0;
    double slack = 1e-8;
};

/// (1 + x) |Z|^l >= u_Q(x) >= min(1, x) |Z|^a in the complete-case modular.
SandwichReport sandwich_check(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                              const UtilityFunction& uf, std::span<const double> wealths);

struct TruncationStep {
    int n = 0;
    double threshold = 0.0;
    double support_probability = 0.0;
    double mean_h = 0.0;
    double u_Q = 0.0;
};

struct TruncationReport {
    std::vector<TruncationStep> steps;
    bool support_decreasing = true;
    bool u_nondecreasing = true;
    bool constraint_holds = true;
};

/// Densities of P(. | h >= n A) for n = 1, 2, ... while the event has mass.
/// Their support shrinks to a null set while each satisfies E[Z h] >= A.
TruncationReport truncation_sequence(const FiniteMarket& market, std::span<const double> h, double A,
                                     const UtilityFunction& uf, double x, int max_n = 50);

struct LeastFavourableComparison {
    /// Worst-case densities for U = power(1/2) and U = power(1/3).
    std::vector<double> Z_half;
    std::vector<double> Z_third;
    double sup_difference = 0.0;
    /// Relative residual of the best affine fit in the constraint
    /// observables on {Z > 0}.
    double affine_residual_half = 0.0;
    double affine_residual_third = 0.0;
};

LeastFavourableComparison least_favourable_comparison(const FiniteMarket& market,
                                                      const ConstraintSet& constraints,
                                                      double y = 1.0);

}  // namespace robustutil

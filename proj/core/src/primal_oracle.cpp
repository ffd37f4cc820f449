#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "robustutil/dual_solver.hpp"
#include "robustutil/errors.hpp"
#include "robustutil/numeric.hpp"

namespace robustutil {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// gamma*_y and its first two derivatives in z > 0.
struct Perspective {
    const UtilityFunction& uf;
    double y;

    double value(double z) const { return gamma_star(uf, y, z); }

    double first(double z) const {
        if (uf.is_power()) {
            const double a = uf.alpha();
            const double q = 1.0 / (1.0 - a);
            return (1.0 - a) / a * q * std::exp((q - 1.0) * std::log(z) - a * q * std::log(y));
        }
        const double r = y / z;
        return uf.conjugate(r) + r * uf.marginal_inverse(r);
    }

    double second(double z) const {
        if (uf.is_power()) {
            const double a = uf.alpha();
            const double q = 1.0 / (1.0 - a);
            return (1.0 - a) / a * q * (q - 1.0) *
                   std::exp((q - 2.0) * std::log(z) - a * q * std::log(y));
        }
        const double r = y / z;
        return -r * r / (z * uf.curvature(uf.marginal_inverse(r)));
    }
};

struct Polytope {
    VectorXd p;
    MatrixXd eq;      // rows: p, then p*h for EQ constraints
    VectorXd eq_rhs;
    MatrixXd ge;      // rows: p*h for GE constraints
    VectorXd ge_rhs;
};

Polytope build(const FiniteMarket& market, const ResolvedConstraints& rc) {
    const auto n = static_cast<Index>(market.size());
    Polytope poly;
    poly.p = Eigen::Map<const VectorXd>(market.probs().data(), n);
    std::vector<std::size_t> eq_rows;
    std::vector<std::size_t> ge_rows;
    for (std::size_t l = 0; l < rc.size(); ++l) {
        (rc.kinds[l] == ConstraintKind::EQ ? eq_rows : ge_rows).push_back(l);
    }
    poly.eq.resize(static_cast<Index>(eq_rows.size() + 1), n);
    poly.eq_rhs.resize(static_cast<Index>(eq_rows.size() + 1));
    poly.eq.row(0) = poly.p.transpose();
    poly.eq_rhs(0) = 1.0;
    for (std::size_t k = 0; k < eq_rows.size(); ++k) {
        const auto r = static_cast<Index>(k + 1);
        for (Index i = 0; i < n; ++i) {
            poly.eq(r, i) = poly.p(i) * rc.rows[eq_rows[k]][static_cast<std::size_t>(i)];
        }
        poly.eq_rhs(r) = rc.bounds[eq_rows[k]];
    }
    poly.ge.resize(static_cast<Index>(ge_rows.size()), n);
    poly.ge_rhs.resize(static_cast<Index>(ge_rows.size()));
    for (std::size_t k = 0; k < ge_rows.size(); ++k) {
        const auto r = static_cast<Index>(k);
        for (Index i = 0; i < n; ++i) {
            poly.ge(r, i) = poly.p(i) * rc.rows[ge_rows[k]][static_cast<std::size_t>(i)];
        }
        poly.ge_rhs(r) = rc.bounds[ge_rows[k]];
    }
    return poly;
}

double objective(const Polytope& poly, const Perspective& f, const VectorXd& z) {
    KahanSum acc;
    for (Index i = 0; i < z.size(); ++i) acc.add(poly.p(i) * f.value(z(i)));
    return acc.value();
}

// Largest step keeping Z > 0 and GE slacks > 0, damped by 0.99.
double max_step(const Polytope& poly, const VectorXd& z, const VectorXd& dz) {
    double s = kInf;
    for (Index i = 0; i < z.size(); ++i) {
        if (dz(i) < 0.0) s = std::min(s, -z(i) / dz(i));
    }
    if (poly.ge.rows() > 0) {
        const VectorXd slack = poly.ge * z - poly.ge_rhs;
        const VectorXd rate = poly.ge * dz;
        for (Index r = 0; r < slack.size(); ++r) {
            if (rate(r) < 0.0) s = std::min(s, -slack(r) / rate(r));
        }
    }
    return 0.99 * s;
}

double barrier_value(const Polytope& poly, const Perspective& f, const VectorXd& z, double t) {
    double v = t * objective(poly, f, z);
    for (Index i = 0; i < z.size(); ++i) {
        if (!(z(i) > 0.0)) return kInf;
        v -= std::log(z(i));
    }
    if (poly.ge.rows() > 0) {
        const VectorXd slack = poly.ge * z - poly.ge_rhs;
        for (Index r = 0; r < slack.size(); ++r) {
            if (!(slack(r) > 0.0)) return kInf;
            v -= std::log(slack(r));
        }
    }
    return v;
}

// Log-barrier path following with Newton steps restricted to the null space
// of the equality rows, so every iterate keeps E[Z] = 1 and the EQ rows.
VectorXd barrier_solve(const Polytope& poly, const Perspective& f, const MatrixXd& null_basis, VectorXd z) {
    const Index n = z.size();
    const double inequalities = static_cast<double>(n + poly.ge.rows());
    for (double t = 1.0; inequalities / t > 1e-12; t *= 8.0) {
        for (int inner = 0; inner < 100; ++inner) {
            VectorXd grad(n);
            MatrixXd hess = MatrixXd::Zero(n, n);
            for (Index i = 0; i < n; ++i) {
                grad(i) = t * poly.p(i) * f.first(z(i)) - 1.0 / z(i);
                hess(i, i) = t * poly.p(i) * f.second(z(i)) + 1.0 / (z(i) * z(i));
            }
            if (poly.ge.rows() > 0) {
                const VectorXd slack = poly.ge * z - poly.ge_rhs;
                for (Index r = 0; r < slack.size(); ++r) {
                    const VectorXd c = poly.ge.row(r).transpose();
                    grad -= c / slack(r);
                    hess.noalias() += c * c.transpose() / (slack(r) * slack(r));
                }
            }
            const VectorXd g_red = null_basis.transpose() * grad;
            const MatrixXd h_red = null_basis.transpose() * hess * null_basis;
            const VectorXd dz = null_basis * h_red.ldlt().solve(-g_red);
            const double decrement = dz.dot(hess * dz);
            if (!std::isfinite(decrement) || decrement < 1e-20) break;
            double step = std::min(1.0, max_step(poly, z, dz));
            const double base = barrier_value(poly, f, z, t);
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
                const VectorXd trial = z + step * dz;
                const double v = barrier_value(poly, f, trial, t);
                if (v <= base - 0.25 * step * decrement || (decrement < 1e-14 && v <= base)) {
                    z = trial;
                    moved = true;
                    break;
                }
            }
            if (!moved || decrement < 1e-18) break;
        }
    }
    return z;
}

double grid_sweep(const Polytope& poly, const Perspective& f, std::size_t n) {
    const int steps = n <= 3 ? 1000 : 200;
    const double delta = 1.0 / steps;
    double best = kInf;
    std::vector<int> k(n, 0);
    VectorXd q(static_cast<Index>(n));
    MatrixXd rows = poly.ge;
    for (Index r = 0; r < rows.rows(); ++r) rows.row(r) = rows.row(r).cwiseQuotient(poly.p.transpose());
    // Enumerate compositions of `steps` into n nonnegative parts.
    const auto visit = [&](auto&& self, std::size_t idx, int remaining) -> void {
        if (idx + 1 == n) {
            k[idx] = remaining;
            for (std::size_t i = 0; i < n; ++i) q(static_cast<Index>(i)) = k[i] * delta;
            if (poly.ge.rows() > 0) {
                const VectorXd lhs = rows * q;
                for (Index r = 0; r < lhs.size(); ++r) {
                    if (lhs(r) < poly.ge_rhs(r)) return;
                }
            }
            KahanSum acc;
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Index>(i);
                acc.add(poly.p(ii) * f.value(q(ii) / poly.p(ii)));
            }
            best = std::min(best, acc.value());
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            k[idx] = v;
            self(self, idx + 1, remaining - v);
        }
    };
    visit(visit, 0, steps);
    return best;
}

}  // namespace

PrimalOracleResult primal_brute_force(const FiniteMarket& market, const ConstraintSet& constraints,
                                      const UtilityFunction& uf, double y,
                                      const PrimalOracleOptions& opts) {
    const std::size_t n = market.size();
    if (n > 12) {
        throw DimensionGuard("primal_brute_force supports at most 12 states (got " +
                             std::to_string(n) + ")");
    }
    if (!(y > 0.0)) throw DomainError("primal_brute_force: y must be positive");
    const auto rc = resolve_constraints(market, constraints);
    const auto fr = feasibility_check(market, constraints, true);
    if (!fr.feasible) throw InfeasibleModel("constraint polytope is empty");
    if (!fr.strictly_feasible) {
        throw InfeasibleModel("constraint polytope has no strictly feasible point");
    }

    const Polytope poly = build(market, rc);
    const Perspective f{uf, y};
    const auto ni = static_cast<Index>(n);
    const VectorXd witness = Eigen::Map<const VectorXd>(fr.witness->data(), ni);

    // Orthonormal basis of the null space of the equality rows.
    const MatrixXd kernel = poly.eq.fullPivLu().kernel();
    const MatrixXd null_basis = kernel.householderQr().householderQ() *
                                MatrixXd::Identity(ni, kernel.cols());

    PrimalOracleResult result;
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 0.9);
    for (int s = 0; s < std::max(1, opts.starts); ++s) {
        VectorXd start = witness;
        if (s > 0) {
            VectorXd d(ni);
            for (Index i = 0; i < ni; ++i) d(i) = gauss(rng);
            d = null_basis * (null_basis.transpose() * d);
            const double reach = max_step(poly, witness, d) / 0.99;
            if (std::isfinite(reach)) start = witness + uni(rng) * reach * d;
        }
        const VectorXd z = barrier_solve(poly, f, null_basis, start);
        const double v = objective(poly, f, z);
        if (v < result.barrier_value) {
            result.barrier_value = v;
            result.Z.assign(z.data(), z.data() + ni);
        }
    }
    result.value = result.barrier_value;

    const bool ge_only = poly.eq.rows() == 1;
    if (opts.grid && n <= 4 && ge_only) {
        result.grid_value = grid_sweep(poly, f, n);
        result.value = std::min(result.value, result.grid_value);
    }
    return result;
}

}  // namespace robustutil

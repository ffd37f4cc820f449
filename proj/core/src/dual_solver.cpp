#include "robustutil/dual_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "robustutil/errors.hpp"
#include "robustutil/log.hpp"
#include "robustutil/numeric.hpp"
#include "robustutil/parallel.hpp"

namespace robustutil {
namespace {

// Constraint rows after dropping constants and merging affine duplicates.
struct Reduced {
    std::vector<std::vector<double>> rows;
    std::vector<double> bounds;
    std::vector<ConstraintKind> kinds;
    std::vector<std::size_t> origin;
    std::size_t original_count = 0;

    std::size_t size() const { return rows.size(); }
};

Reduced reduce(std::span<const double> p, const ResolvedConstraints& rc) {
    const std::size_t m = rc.size();
    std::vector<std::vector<double>> centered(m);
    std::vector<double> mean(m);
    std::vector<double> norm(m);
    std::vector<bool> constant(m, false);
    for (std::size_t l = 0; l < m; ++l) {
        const auto& h = rc.rows[l];
        mean[l] = kahan_dot(p, h);
        centered[l].resize(h.size());
        double scale = 1.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            centered[l][i] = h[i] - mean[l];
            scale = std::max(scale, std::abs(h[i]));
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) sq += p[i] * centered[l][i] * centered[l][i];
        norm[l] = std::sqrt(sq);
        constant[l] = norm[l] <= 1e-14 * scale;
    }

    // leader[l] = index of the class representative for positively parallel rows.
    std::vector<std::size_t> leader(m);
    for (std::size_t l = 0; l < m; ++l) {
        leader[l] = l;
        if (constant[l]) continue;
        for (std::size_t k = 0; k < l; ++k) {
            if (constant[k] || leader[k] != k) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * centered[k][i] * centered[l][i];
            if (dot / (norm[k] * norm[l]) > 1.0 - 1e-12) {
                leader[l] = k;
                break;
            }
        }
    }

    Reduced r;
    r.original_count = m;
    for (std::size_t k = 0; k < m; ++k) {
        if (constant[k] || leader[k] != k) continue;
        std::size_t chosen = k;
        bool chosen_eq = rc.kinds[k] == ConstraintKind::EQ;
        double chosen_bound = rc.bounds[k];
        for (std::size_t l = k + 1; l < m; ++l) {
            if (leader[l] != k) continue;
            const double c = norm[l] / norm[k];
            const double d = mean[l] - c * mean[k];
            const double in_leader_units = (rc.bounds[l] - d) / c;
            const bool eq = rc.kinds[l] == ConstraintKind::EQ;
            if (chosen_eq) continue;
            if (eq || in_leader_units > chosen_bound) {
                chosen = l;
                chosen_eq = eq;
                chosen_bound = in_leader_units;
            }
        }
        r.rows.push_back(rc.rows[chosen]);
        r.bounds.push_back(rc.bounds[chosen]);
        r.kinds.push_back(rc.kinds[chosen]);
        r.origin.push_back(chosen);
    }
    if (r.size() < m) {
        std::ostringstream os;
        os << "dual: " << m - r.size() << " constant or duplicate constraint row(s) removed";
        log::info(os.str());
    }

    if (r.size() > 1) {
        Eigen::MatrixXd mat(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(r.size()));
        for (std::size_t l = 0; l < r.size(); ++l) {
            const std::size_t src = r.origin[l];
            for (std::size_t i = 0; i < p.size(); ++i) {
                mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
                    std::sqrt(p[i]) * centered[src][i] / norm[src];
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(mat);
        qr.setThreshold(1e-10);
        if (static_cast<std::size_t>(qr.rank()) < r.size()) {
            log::warn("dual: constraint observables are linearly dependent; multipliers are not unique");
        }
    }
    return r;
}

struct Evaluation {
    double value = 0.0;
    std::vector<double> grad;
};

class DualProblem {
public:
    DualProblem(std::span<const double> p, const Reduced& red, const UtilityFunction& uf, double y)
        : p_(p), red_(red), uf_(uf), y_(y), w_(p.size()) {}

    std::size_t dim() const { return red_.size() + 1; }
    bool is_ge(std::size_t j) const {
        return j < red_.size() && red_.kinds[j] == ConstraintKind::GE;
    }

    void fill_w(std::span<const double> theta) {
        const std::size_t m = red_.size();
        for (std::size_t i = 0; i < p_.size(); ++i) {
            double w = theta[m];
            for (std::size_t l = 0; l < m; ++l) w += theta[l] * red_.rows[l][i];
            w_[i] = w;
        }
    }

    Evaluation evaluate(std::span<const double> theta) {
        fill_w(theta);
        const std::size_t m = red_.size();
        Evaluation ev;
        KahanSum linear;
        for (std::size_t l = 0; l < m; ++l) linear.add(theta[l] * red_.bounds[l]);
        linear.add(theta[m]);
        KahanSum integral;
        std::vector<KahanSum> gsum(m + 1);
        for (std::size_t i = 0; i < p_.size(); ++i) {
            const double w = w_[i];
            if (w <= 0.0) continue;
            const double inv = uf_.inverse(w);
            if (is_pos_inf(inv)) {
                ev.value = -kInf;
                ev.grad.assign(m + 1, 0.0);
                return ev;
            }
            integral.add(p_[i] * inv);
            const double zi = p_[i] * uf_.inverse_prime(w);
            for (std::size_t l = 0; l < m; ++l) gsum[l].add(zi * red_.rows[l][i]);
            gsum[m].add(zi);
        }
        ev.value = linear.value() - y_ * integral.value();
        ev.grad.resize(m + 1);
        for (std::size_t l = 0; l < m; ++l) ev.grad[l] = red_.bounds[l] - y_ * gsum[l].value();
        ev.grad[m] = 1.0 - y_ * gsum[m].value();
        return ev;
    }

    // Negative Hessian y E[(U^-1)''(w) 1{w>0} theta theta^T]; requires fill_w.
    Eigen::MatrixXd curvature() const {
        const std::size_t m = red_.size();
        const auto d = static_cast<Eigen::Index>(m + 1);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
        Eigen::VectorXd v(d);
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (w_[i] <= 0.0) continue;
            const double s = y_ * p_[i] * uf_.inverse_second(w_[i]);
            if (!(s > 0.0) || !std::isfinite(s)) continue;
            for (std::size_t l = 0; l < m; ++l) v(static_cast<Eigen::Index>(l)) = red_.rows[l][i];
            v(d - 1) = 1.0;
            h.noalias() += s * v * v.transpose();
        }
        return h;
    }

    void project(std::vector<double>& theta) const {
        for (std::size_t j = 0; j < red_.size(); ++j) {
            if (is_ge(j) && theta[j] < 0.0) theta[j] = 0.0;
        }
    }

    // Norm of P(theta + grad) - theta.
    double natural_residual(std::span<const double> theta, std::span<const double> grad) const {
        double sq = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            double moved = theta[j] + grad[j];
            if (is_ge(j)) moved = std::max(moved, 0.0);
            const double r = moved - theta[j];
            sq += r * r;
        }
        return std::sqrt(sq);
    }

    // max_j |theta_j grad_j| over the constraint multipliers.
    double complementarity(std::span<const double> theta, std::span<const double> grad) const {
        double worst = 0.0;
        for (std::size_t j = 0; j < red_.size(); ++j) worst = std::max(worst, std::abs(theta[j] * grad[j]));
        return worst;
    }

private:
    std::span<const double> p_;
    const Reduced& red_;
    const UtilityFunction& uf_;
    double y_;
    std::vector<double> w_;
};

struct RunResult {
    std::vector<double> theta;
    double value = -kInf;
    double residual = kInf;
    int iterations = 0;
    bool converged = false;
};

RunResult ascend(DualProblem& prob, std::vector<double> theta, const DualOptions& opts) {
    constexpr double kArmijo = 1e-4;
    const std::size_t dim = prob.dim();
    RunResult run;
    prob.project(theta);
    Evaluation ev = prob.evaluate(theta);
    double pg_step = 1.0;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        if (!std::isfinite(ev.value)) break;
        const double res = prob.natural_residual(theta, ev.grad);
        run.residual = res;
        if (res <= opts.tol * (1.0 + std::abs(ev.value)) && prob.complementarity(theta, ev.grad) <= opts.tol) {
            run.converged = true;
            break;
        }
        if (ev.value > 1.0 / opts.tol) {
            std::ostringstream os;
            os << "dual value " << ev.value << " exceeds 1/tol along an ascent ray"
               << " (possible qualification failure)";
            throw UnboundedDual(os.str());
        }

        const auto accept = [&](const std::vector<double>& trial, const Evaluation& te) {
            if (!std::isfinite(te.value)) return false;
            double ascent = 0.0;
            for (std::size_t j = 0; j < dim; ++j) ascent += ev.grad[j] * (trial[j] - theta[j]);
            if (te.value >= ev.value + kArmijo * ascent) return true;
            // Near the optimum F changes below rounding; fall back to a
            // decrease of the stationarity residual.
            return prob.natural_residual(trial, te.grad) < 0.5 * res && te.value >= ev.value - 1e-14 * (1.0 + std::abs(ev.value));
        };

        bool moved = false;
        if (opts.newton) {
            prob.fill_w(theta);
            const Eigen::MatrixXd h = prob.curvature();
            std::vector<std::size_t> free;
            for (std::size_t j = 0; j < dim; ++j) {
                if (prob.is_ge(j) && theta[j] <= 0.0 && ev.grad[j] <= 0.0) continue;
                free.push_back(j);
            }
            const auto f = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd a(f, f);
            Eigen::VectorXd b(f);
            double diag = 0.0;
            for (Eigen::Index r = 0; r < f; ++r) {
                b(r) = ev.grad[free[static_cast<std::size_t>(r)]];
                for (Eigen::Index c = 0; c < f; ++c) {
                    a(r, c) = h(static_cast<Eigen::Index>(free[static_cast<std::size_t>(r)]),
                                static_cast<Eigen::Index>(free[static_cast<std::size_t>(c)]));
                }
                diag = std::max(diag, a(r, r));
            }
            double mu = 1e-12 * (1.0 + diag);
            for (int attempt = 0; attempt < 4 && !moved; ++attempt, mu *= 1e3) {
                Eigen::MatrixXd damped = a;
                damped.diagonal().array() += mu;
                const Eigen::VectorXd d = damped.ldlt().solve(b);
                if (!d.allFinite()) continue;
                double t = 1.0;
                for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                    std::vector<double> trial = theta;
                    for (Eigen::Index r = 0; r < f; ++r) {
                        trial[free[static_cast<std::size_t>(r)]] += t * d(r);
                    }
                    prob.project(trial);
                    Evaluation te = prob.evaluate(trial);
                    if (accept(trial, te)) {
                        theta = std::move(trial);
                        ev = std::move(te);
                        moved = true;
                        break;
                    }
                }
            }
        }
        if (!moved) {
            for (int ls = 0; ls < 60; ++ls) {
                std::vector<double> trial = theta;
                for (std::size_t j = 0; j < dim; ++j) trial[j] += pg_step * ev.grad[j];
                prob.project(trial);
                Evaluation te = prob.evaluate(trial);
                if (accept(trial, te)) {
                    theta = std::move(trial);
                    ev = std::move(te);
                    moved = true;
                    pg_step *= 2.0;
                    break;
                }
                pg_step *= 0.5;
            }
        }
        if (!moved) break;
    }
    run.iterations = it;
    run.value = ev.value;
    run.residual = std::isfinite(ev.value) ? prob.natural_residual(theta, ev.grad) : kInf;
    run.converged = run.converged || run.residual <= opts.tol * (1.0 + std::abs(ev.value));
    run.theta = std::move(theta);
    return run;
}

void require_y(double y) {
    if (!(y > 0.0) || !std::isfinite(y)) {
        std::ostringstream os;
        os << "dual: y must be positive and finite (got " << y << ")";
        throw DomainError(os.str());
    }
}

KktResiduals kkt_residuals(const FiniteMarket& market, const ResolvedConstraints& rc,
                           const DualPoint& pt, std::span<const double> z, double grad_norm) {
    KktResiduals k;
    k.grad_norm = grad_norm;
    k.normalization_residual = std::abs(kahan_dot(market.probs(), z) - 1.0);
    for (std::size_t l = 0; l < rc.size(); ++l) {
        std::vector<double> zh(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) zh[i] = z[i] * rc.rows[l][i];
        const double gap = kahan_dot(market.probs(), zh) - rc.bounds[l];
        k.constraint_residuals.push_back(rc.kinds[l] == ConstraintKind::GE ? std::max(-gap, 0.0)
                                                                          : std::abs(gap));
        k.complementarity_residuals.push_back(std::abs(pt.g[l] * gap));
    }
    return k;
}

}  // namespace

double KktResiduals::max_residual() const {
    double r = normalization_residual;
    for (const double v : constraint_residuals) r = std::max(r, v);
    for (const double v : complementarity_residuals) r = std::max(r, v);
    return r;
}

double OptimalityReport::max_residual() const {
    return std::max({feasibility, complementarity, pointwise});
}

std::vector<double> density_from_point(const FiniteMarket& market, const ConstraintSet& constraints,
                                       const UtilityFunction& uf, double y, const DualPoint& p) {
    require_y(y);
    const auto rc = resolve_constraints(market, constraints);
    if (p.g.size() != rc.size()) throw ValidationError("dual point has the wrong number of multipliers");
    std::vector<double> z(market.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double w = p.beta;
        for (std::size_t l = 0; l < rc.size(); ++l) w += p.g[l] * rc.rows[l][i];
        z[i] = w > 0.0 ? y * uf.inverse_prime(w) : 0.0;
    }
    return z;
}

DualObjective dual_objective(const FiniteMarket& market, const ConstraintSet& constraints,
                             const UtilityFunction& uf, double y, const DualPoint& p) {
    require_y(y);
    const auto rc = resolve_constraints(market, constraints);
    if (p.g.size() != rc.size()) throw ValidationError("dual point has the wrong number of multipliers");
    Reduced all;
    all.rows = rc.rows;
    all.bounds = rc.bounds;
    all.kinds = rc.kinds;
    all.original_count = rc.size();
    DualProblem prob(market.probs(), all, uf, y);
    std::vector<double> theta(p.g);
    theta.push_back(p.beta);
    auto ev = prob.evaluate(theta);
    return {ev.value, std::move(ev.grad)};
}

DualSolution solve_dual(const FiniteMarket& market, const ConstraintSet& constraints,
                        const UtilityFunction& uf, double y, const DualOptions& opts) {
    require_y(y);
    if (!(opts.tol > 0.0)) throw DomainError("dual: tol must be positive");
    const auto rc = resolve_constraints(market, constraints);
    if (!rc.rows.empty()) {
        const auto fr = feasibility_check(market, constraints, true);
        if (!fr.feasible) throw InfeasibleModel("constraint polytope is empty");
        if (!fr.strictly_feasible) {
            std::ostringstream os;
            os << "constraint polytope is not strictly feasible (interior margin "
               << fr.interior_margin << ")";
            if (opts.require_strict_feasibility) throw InfeasibleModel(os.str());
            log::warn(os.str());
        }
    }
    const Reduced red = reduce(market.probs(), rc);
    const std::size_t m = red.size();

    const double beta0 = uf.value(uf.marginal_inverse(y));
    std::vector<double> base(m + 1, 0.0);
    base[m] = beta0;
    if (opts.warm_start && opts.warm_start->g.size() == rc.size()) {
        for (std::size_t l = 0; l < m; ++l) base[l] = opts.warm_start->g[red.origin[l]];
        base[m] = opts.warm_start->beta;
    }

    const int starts = std::max(1, opts.multistarts);
    std::vector<RunResult> runs(static_cast<std::size_t>(starts));
    parallel_for(runs.size(), opts.threads, [&](std::size_t s) {
        DualProblem prob(market.probs(), red, uf, y);
        std::vector<double> theta = base;
        if (s > 0) {
            std::mt19937_64 rng(opts.seed + 0x9E3779B97F4A7C15ULL * s);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::uniform_real_distribution<double> uni(0.5, 1.5);
            for (std::size_t l = 0; l < m; ++l) {
                double scale = 0.0;
                for (const double v : red.rows[l]) scale = std::max(scale, std::abs(v));
                const double draw = 0.5 * beta0 / (1.0 + scale) * gauss(rng);
                theta[l] = red.kinds[l] == ConstraintKind::GE ? std::abs(draw) : draw;
            }
            theta[m] = beta0 * uni(rng);
            // Bounded utilities: pull back inside the domain of the objective.
            for (int shrink = 0; shrink < 60 && !std::isfinite(prob.evaluate(theta).value); ++shrink) {
                for (std::size_t l = 0; l < m; ++l) theta[l] *= 0.5;
                theta[m] = 0.5 * (theta[m] + beta0);
            }
        }
        runs[s] = ascend(prob, std::move(theta), opts);
    });

    std::size_t best = 0;
    for (std::size_t s = 1; s < runs.size(); ++s) {
        const auto& a = runs[s];
        const auto& b = runs[best];
        if ((a.converged && !b.converged) || (a.converged == b.converged && a.value > b.value)) best = s;
    }
    const RunResult& run = runs[best];

    DualSolution sol;
    sol.point.g.assign(rc.size(), 0.0);
    for (std::size_t l = 0; l < m; ++l) sol.point.g[red.origin[l]] = run.theta[l];
    sol.point.beta = run.theta[m];
    sol.value = run.value;
    sol.iterations = run.iterations;
    sol.Z = density_from_point(market, constraints, uf, y, sol.point);
    sol.kkt = kkt_residuals(market, rc, sol.point, sol.Z, run.residual);
    sol.converged = run.converged && sol.kkt.max_residual() <= 10.0 * opts.tol;

    if (!sol.converged) {
        std::ostringstream os;
        os << "dual solver did not converge at y = " << y << ": projected gradient "
           << sol.kkt.grad_norm << ", normalization " << sol.kkt.normalization_residual
           << ", max KKT residual " << sol.kkt.max_residual() << " after " << sol.iterations
           << " iterations";
        if (opts.throw_on_nonconvergence) throw NonConvergence(os.str());
        log::warn(os.str());
    }
    return sol;
}

OptimalityReport verify_optimality(const FiniteMarket& market, const ConstraintSet& constraints,
                                   const UtilityFunction& uf, double y, const DualSolution& sol) {
    OptimalityReport rep;
    const auto rc = resolve_constraints(market, constraints);
    const auto p = market.probs();
    if (sol.Z.size() != market.size() || sol.point.g.size() != rc.size()) {
        rep.feasibility = rep.complementarity = rep.pointwise = kInf;
        return rep;
    }
    const auto kkt = kkt_residuals(market, rc, sol.point, sol.Z, 0.0);
    rep.feasibility = kkt.normalization_residual;
    for (const double v : kkt.constraint_residuals) rep.feasibility = std::max(rep.feasibility, v);
    for (const double z : sol.Z) rep.feasibility = std::max(rep.feasibility, std::max(-z, 0.0));

    for (std::size_t l = 0; l < rc.size(); ++l) {
        rep.complementarity = std::max(rep.complementarity, kkt.complementarity_residuals[l]);
        if (rc.kinds[l] == ConstraintKind::GE) {
            rep.complementarity = std::max(rep.complementarity, std::max(-sol.point.g[l], 0.0));
        }
    }

    const auto expected = density_from_point(market, constraints, uf, y, sol.point);
    for (std::size_t i = 0; i < p.size(); ++i) {
        rep.pointwise = std::max(rep.pointwise, std::abs(sol.Z[i] - expected[i]));
    }
    return rep;
}

}  // namespace robustutil

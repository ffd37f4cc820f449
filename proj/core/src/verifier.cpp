#include "robustutil/verifier.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "robustutil/errors.hpp"
#include "robustutil/numeric.hpp"
#include "robustutil/orlicz.hpp"
#include "robustutil/parallel.hpp"

namespace robustutil {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_density(const FiniteMarket& market, std::span<const double> z, std::size_t index) {
    std::ostringstream os;
    os << "density " << index << ": ";
    if (z.size() != market.size()) {
        os << "has " << z.size() << " entries, expected " << market.size();
        throw ValidationError(os.str());
    }
    for (const double v : z) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            os << "entries must be finite and >= 0";
            throw ValidationError(os.str());
        }
    }
    const double mean = kahan_dot(market.probs(), z);
    if (std::abs(mean - 1.0) > 1e-9) {
        os << "mean " << mean << " differs from 1";
        throw ValidationError(os.str());
    }
}

ComparisonRow compare(std::string name, double computed, double expected, double tol) {
    ComparisonRow r;
    r.quantity = std::move(name);
    r.computed = computed;
    r.expected = expected;
    r.abs_error = std::abs(computed - expected);
    r.rel_error = r.abs_error / std::max(std::abs(expected), 1e-300);
    r.tolerance = tol;
    r.pass = r.rel_error <= tol;
    return r;
}

ComparisonRow compare_pointwise(std::string name, std::span<const double> computed,
                                std::span<const double> expected, double tol) {
    ComparisonRow worst = compare(name, computed[0], expected[0], tol);
    for (std::size_t i = 1; i < computed.size(); ++i) {
        auto r = compare(name, computed[i], expected[i], tol);
        if (r.rel_error > worst.rel_error) worst = std::move(r);
    }
    return worst;
}

// Euclidean projection onto {X >= 0, p.X <= x}: X_i = max(v_i - tau p_i, 0)
// with tau found exactly from the sorted breakpoints v_i / p_i.
std::vector<double> project_budget(std::span<const double> v, std::span<const double> p, double x) {
    const std::size_t n = v.size();
    std::vector<double> out(n);
    double spend = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::max(v[i], 0.0);
        spend += p[i] * out[i];
    }
    if (spend <= x) return out;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] / p[a] > v[b] / p[b]; });
    double pv = 0.0;
    double pp = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        pv += p[i] * v[i];
        pp += p[i] * p[i];
        tau = (pv - x) / pp;
        const double next = k + 1 < n ? v[order[k + 1]] / p[order[k + 1]] : -kInf;
        if (tau >= next) break;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - tau * p[i], 0.0);
    return out;
}

class InnerValues {
public:
    InnerValues(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                const UtilityFunction& uf)
        : p_(market.probs()), z_(densities), uf_(uf) {}

    std::size_t k() const { return z_.size(); }

    double value(std::size_t j, std::span<const double> x) const {
        KahanSum acc;
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (z_[j][i] > 0.0) acc.add(p_[i] * z_[j][i] * uf_.value(x[i]));
        }
        return acc.value();
    }

    // min_j and the active index.
    std::pair<double, std::size_t> min(std::span<const double> x) const {
        double best = kInf;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < z_.size(); ++j) {
            const double v = value(j, x);
            if (v < best) {
                best = v;
                arg = j;
            }
        }
        return {best, arg};
    }

    std::span<const double> probs() const { return p_; }
    std::span<const double> density(std::size_t j) const { return z_[j]; }
    const UtilityFunction& utility() const { return uf_; }

private:
    std::span<const double> p_;
    std::span<const std::vector<double>> z_;
    const UtilityFunction& uf_;
};

// max t subject to E[Z_j U(X)] >= t, X > 0, p.X < x, by a log barrier.
std::vector<double> barrier_sup_inf(const InnerValues& inner, double x, std::vector<double> start) {
    const auto p = inner.probs();
    const auto& uf = inner.utility();
    const std::size_t n = p.size();
    const std::size_t k = inner.k();
    const auto dim = static_cast<Index>(n + 1);

    VectorXd v(dim);
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Index>(i)) = 0.9 * start[i] + 0.05 * x;
    const auto unpack = [&](const VectorXd& s) {
        return std::vector<double>(s.data(), s.data() + n);
    };
    {
        const double m = inner.min(unpack(v)).first;
        v(dim - 1) = m - 0.1 * (std::abs(m) + 1e-3);
    }

    const auto barrier = [&](const VectorXd& s, double tau) {
        double spend = 0.0;
        double total = -tau * s(dim - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = s(static_cast<Index>(i));
            if (!(xi > 0.0)) return kInf;
            total -= std::log(xi);
            spend += p[i] * xi;
        }
        if (!(spend < x)) return kInf;
        total -= std::log(x - spend);
        const auto xs = unpack(s);
        for (std::size_t j = 0; j < k; ++j) {
            const double slack = inner.value(j, xs) - s(dim - 1);
            if (!(slack > 0.0)) return kInf;
            total -= std::log(slack);
        }
        return total;
    };

    const double count = static_cast<double>(n + k + 1);
    for (double tau = 1.0; count / tau > 1e-11; tau *= 8.0) {
        for (int inner_it = 0; inner_it < 100; ++inner_it) {
            VectorXd grad = VectorXd::Zero(dim);
            MatrixXd hess = MatrixXd::Zero(dim, dim);
            grad(dim - 1) = -tau;
            double spend = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Index>(i);
                grad(ii) -= 1.0 / v(ii);
                hess(ii, ii) += 1.0 / (v(ii) * v(ii));
                spend += p[i] * v(ii);
            }
            const double room = x - spend;
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Index>(i);
                grad(ii) += p[i] / room;
                for (std::size_t l = 0; l < n; ++l) {
                    hess(ii, static_cast<Index>(l)) += p[i] * p[l] / (room * room);
                }
            }
            const auto xs = unpack(v);
            for (std::size_t j = 0; j < k; ++j) {
                const auto z = inner.density(j);
                const double slack = inner.value(j, xs) - v(dim - 1);
                VectorXd a(dim);
                for (std::size_t i = 0; i < n; ++i) {
                    a(static_cast<Index>(i)) = p[i] * z[i] * uf.marginal(xs[i]);
                }
                a(dim - 1) = -1.0;
                grad -= a / slack;
                hess.noalias() += a * a.transpose() / (slack * slack);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto ii = static_cast<Index>(i);
                    hess(ii, ii) -= p[i] * z[i] * uf.curvature(xs[i]) / slack;
                }
            }
            const VectorXd step = hess.ldlt().solve(-grad);
            const double decrement = -grad.dot(step);
            if (!step.allFinite() || decrement < 1e-20) break;
            const double base = barrier(v, tau);
            double t = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
                const VectorXd trial = v + t * step;
                const double b = barrier(trial, tau);
                if (b <= base - 0.25 * t * decrement || (decrement < 1e-14 && b <= base)) {
                    v = trial;
                    moved = true;
                    break;
                }
            }
            if (!moved || decrement < 1e-18) break;
        }
    }
    return unpack(v);
}

double grid_sup_inf(const InnerValues& inner, double x, double step) {
    const auto p = inner.probs();
    const std::size_t n = p.size();
    const int steps = static_cast<int>(std::lround(1.0 / step));
    double best = -kInf;
    std::vector<int> k(n, 0);
    std::vector<double> xs(n);
    const auto visit = [&](auto&& self, std::size_t idx, int remaining) -> void {
        if (idx + 1 == n) {
            k[idx] = remaining;
            for (std::size_t i = 0; i < n; ++i) {
                xs[i] = x * (static_cast<double>(k[i]) / steps) / p[i];
            }
            best = std::max(best, inner.min(xs).first);
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

struct HullResult {
    double value = kInf;
    std::vector<double> weights;
};

// min over the simplex of u_{Q_lambda}(x); gradient E[Z_j U(X_lambda)].
HullResult hull_inf_sup(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                        const UtilityFunction& uf, double x) {
    const std::size_t k = densities.size();
    const std::size_t n = market.size();
    const auto p = market.probs();
    const auto mix = [&](std::span<const double> w) {
        std::vector<double> q(n, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < n; ++i) q[i] += w[j] * densities[j][i];
        }
        const double mean = kahan_dot(p, q);
        for (auto& v : q) v /= mean;
        return q;
    };
    const auto eval = [&](std::span<const double> w, std::vector<double>* grad) {
        const auto sol = classical_u_Q(market, uf, mix(w), x);
        if (grad) {
            grad->assign(k, 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                KahanSum acc;
                for (std::size_t i = 0; i < n; ++i) {
                    if (densities[j][i] > 0.0) acc.add(p[i] * densities[j][i] * uf.value(sol.X_Q[i]));
                }
                (*grad)[j] = acc.value();
            }
        }
        return sol.u_Q;
    };

    std::vector<std::vector<double>> starts;
    starts.emplace_back(k, 1.0 / static_cast<double>(k));
    for (std::size_t j = 0; j < k && k > 1; ++j) {
        std::vector<double> e(k, 0.0);
        e[j] = 1.0;
        starts.push_back(std::move(e));
    }
    HullResult best;
    for (auto w : starts) {
        std::vector<double> g;
        double f = eval(w, &g);
        double step = 1.0;
        for (int it = 0; it < 1000 && k > 1; ++it) {
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
                std::vector<double> trial(k);
                for (std::size_t j = 0; j < k; ++j) trial[j] = w[j] - step * g[j];
                trial = project_to_simplex(trial);
                double decrease = 0.0;
                double change = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    decrease += g[j] * (trial[j] - w[j]);
                    change = std::max(change, std::abs(trial[j] - w[j]));
                }
                if (change < 1e-15) break;
                std::vector<double> tg;
                const double ft = eval(trial, &tg);
                if (ft <= f + 1e-4 * decrease) {
                    moved = f - ft > 1e-16 * (1.0 + std::abs(f));
                    w = std::move(trial);
                    f = ft;
                    g = std::move(tg);
                    step *= 4.0;
                    break;
                }
            }
            if (!moved) break;
        }
        if (f < best.value) {
            best.value = f;
            best.weights = w;
        }
    }
    return best;
}

std::vector<double> solve_density(const FiniteMarket& market, const ConstraintSet& constraints,
                                  double alpha, double y) {
    DualOptions o;
    o.multistarts = 2;
    return solve_dual(market, constraints, UtilityFunction::power(alpha), y, o).Z;
}

double affine_residual(const FiniteMarket& market, const ResolvedConstraints& rc,
                       std::span<const double> z) {
    const auto p = market.probs();
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] > 0.0) support.push_back(i);
    }
    const auto rows = static_cast<Index>(support.size());
    const auto cols = static_cast<Index>(rc.size() + 1);
    MatrixXd a(rows, cols);
    VectorXd b(rows);
    double norm = 0.0;
    for (Index r = 0; r < rows; ++r) {
        const std::size_t i = support[static_cast<std::size_t>(r)];
        const double w = std::sqrt(p[i]);
        a(r, 0) = w;
        for (std::size_t l = 0; l < rc.size(); ++l) a(r, static_cast<Index>(l + 1)) = w * rc.rows[l][i];
        b(r) = w * z[i];
        norm += p[i] * z[i] * z[i];
    }
    const VectorXd coef = a.colPivHouseholderQr().solve(b);
    return (a * coef - b).norm() / std::sqrt(norm);
}

}  // namespace

void BSOracle::validate() const {
    if (!(sigma > 0.0) || !(T > 0.0) || !(s0 > 0.0) || !(x > 0.0)) {
        throw DomainError("black-scholes oracle: sigma, T, s0 and x must be positive");
    }
    const double growth = std::exp(sigma * sigma * T);
    const double a = A / s0;
    if (!(growth > a && a > 1.0)) {
        std::ostringstream os;
        os << "outside explicit-solution regime: need exp(sigma^2 T) = " << growth
           << " > A / s0 = " << a << " > 1";
        throw DomainError(os.str());
    }
}

DualPoint BSClosedForm::dual_at(double y) const {
    const double a = oracle.A / oracle.s0;
    DualPoint pt;
    pt.beta = 2.0 * (growth - a) / (y * (growth - 1.0));
    pt.g = {2.0 * (a - 1.0) / (y * (growth - 1.0)) / oracle.s0};
    return pt;
}

double BSClosedForm::Z_hat(double s) const {
    const double a = oracle.A / oracle.s0;
    return (growth - a + s / oracle.s0 * (a - 1.0)) / (growth - 1.0);
}

double BSClosedForm::X_hat(double s) const {
    const double a = oracle.A / oracle.s0;
    const double lin = growth - a + s / oracle.s0 * (a - 1.0);
    return oracle.x * lin * lin / ((growth - 1.0 + (a - 1.0) * (a - 1.0)) * (growth - 1.0));
}

BSClosedForm bs_closed_form(const BSOracle& o) {
    o.validate();
    BSClosedForm cf;
    cf.oracle = o;
    cf.growth = std::exp(o.sigma * o.sigma * o.T);
    const double a = o.A / o.s0;
    cf.K = 1.0 + (a - 1.0) * (a - 1.0) / (cf.growth - 1.0);
    cf.u = 2.0 * std::sqrt(o.x * cf.K);
    cf.y_hat = std::sqrt(cf.K / o.x);
    return cf;
}

LognormalSpec bs_market_spec(const BSOracle& o, int nodes) {
    return LognormalSpec{o.sigma, o.T, o.s0, nodes};
}

ConstraintSet bs_constraints(const BSOracle& o) {
    return ConstraintSet{{Constraint{"S_T", ConstraintKind::GE, o.A}}};
}

double bs_default_tolerance(int nodes) { return nodes >= 256 ? 1e-4 : 1e-3; }

BSVerification verify_bs(const BSOracle& o, int nodes, double rel_tol, const RobustOptions& opts) {
    BSVerification out;
    out.closed_form = bs_closed_form(o);
    out.nodes = nodes;
    const auto market = gauss_hermite_market(bs_market_spec(o, nodes));
    const auto constraints = bs_constraints(o);
    const auto uf = UtilityFunction::power(0.5);
    out.solution = solve_robust(market, constraints, uf, o.x, opts);
    const auto& sol = out.solution;
    const auto& cf = out.closed_form;

    const auto s = market.observable("S_T");
    std::vector<double> z_cf(s.size());
    std::vector<double> x_cf(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        z_cf[i] = cf.Z_hat(s[i]);
        x_cf[i] = cf.X_hat(s[i]);
    }
    const auto dual_cf = cf.dual_at(sol.y_hat);
    out.rows.push_back(compare("u", sol.u_value, cf.u, rel_tol));
    out.rows.push_back(compare("y_hat", sol.y_hat, cf.y_hat, rel_tol));
    out.rows.push_back(compare("v(y_hat)", sol.v_at_y_hat, cf.v(sol.y_hat), rel_tol));
    out.rows.push_back(compare("g(y_hat)", sol.dual_point.g[0], dual_cf.g[0], rel_tol));
    out.rows.push_back(compare("beta(y_hat)", sol.dual_point.beta, dual_cf.beta, rel_tol));
    out.rows.push_back(compare_pointwise("Z_hat", sol.Z_hat, z_cf, rel_tol));
    out.rows.push_back(compare_pointwise("X_hat", sol.X_hat, x_cf, rel_tol));
    out.pass = true;
    for (const auto& r : out.rows) {
        out.max_rel_error = std::max(out.max_rel_error, r.rel_error);
        out.pass = out.pass && r.pass;
    }
    return out;
}

MinimaxResult minimax_check(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                            const UtilityFunction& uf, double x, const MinimaxOptions& opts) {
    const std::size_t n = market.size();
    if (densities.empty()) throw DomainError("minimax_check: need at least one density");
    if (n > 8 && densities.size() > 1) {
        throw DimensionGuard("minimax_check supports at most 8 states with more than one density");
    }
    if (!(x > 0.0)) throw DomainError("minimax_check: x must be positive");
    for (std::size_t j = 0; j < densities.size(); ++j) check_density(market, densities[j], j);

    const InnerValues inner(market, densities, uf);
    const auto p = market.probs();
    MinimaxResult res;

    // Supergradient ascent with diminishing steps.
    const int starts = std::max(1, opts.multistarts);
    std::vector<std::pair<double, std::vector<double>>> runs(static_cast<std::size_t>(starts));
    parallel_for(runs.size(), opts.threads, [&](std::size_t s) {
        std::vector<double> xs(n, x);
        if (s > 0) {
            std::mt19937_64 rng(opts.seed + 0x9E3779B97F4A7C15ULL * s);
            std::exponential_distribution<double> expo(1.0);
            double total = 0.0;
            for (auto& v : xs) total += (v = expo(rng));
            for (std::size_t i = 0; i < n; ++i) xs[i] = x * xs[i] / total / p[i];
        }
        auto [best, arg] = inner.min(xs);
        std::vector<double> best_x = xs;
        std::vector<double> g(n);
        for (int it = 0; it < opts.max_iter; ++it) {
            const auto [val, j] = inner.min(xs);
            if (val > best) {
                best = val;
                best_x = xs;
            }
            const auto z = inner.density(j);
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                g[i] = p[i] * z[i] * uf.marginal(std::max(xs[i], 1e-12 * x));
                norm += g[i] * g[i];
            }
            norm = std::sqrt(norm);
            if (!(norm > 0.0) || !std::isfinite(norm)) break;
            const double eta = x / (static_cast<double>(it) + 10.0);
            for (std::size_t i = 0; i < n; ++i) g[i] = xs[i] + eta * g[i] / norm;
            xs = project_budget(g, p, x);
        }
        runs[s] = {best, std::move(best_x)};
    });
    std::size_t best_run = 0;
    for (std::size_t s = 1; s < runs.size(); ++s) {
        if (runs[s].first > runs[best_run].first) best_run = s;
    }
    res.ascent_sup_inf = runs[best_run].first;

    const auto refined = barrier_sup_inf(inner, x, runs[best_run].second);
    const double refined_value = inner.min(refined).first;
    if (refined_value >= res.ascent_sup_inf) {
        res.sup_inf = refined_value;
        res.X_star = refined;
    } else {
        res.sup_inf = res.ascent_sup_inf;
        res.X_star = runs[best_run].second;
    }
    res.j_star = inner.min(res.X_star).second;

    if (opts.grid && n <= 4) {
        const double step = n <= 3 ? opts.grid_step : std::max(opts.grid_step, 5e-3);
        res.grid_sup_inf = grid_sup_inf(inner, x, step);
    }

    res.vertex_inf_sup = kInf;
    for (const auto& z : densities) {
        res.vertex_inf_sup = std::min(res.vertex_inf_sup, classical_u_Q(market, uf, z, x).u_Q);
    }
    const auto hull = hull_inf_sup(market, densities, uf, x);
    res.inf_sup = std::min(hull.value, res.vertex_inf_sup);
    res.hull_weights = hull.weights;
    res.gap = res.inf_sup - res.sup_inf;
    res.saddle = std::abs(res.gap) <= opts.tol;
    return res;
}

SandwichReport sandwich_check(const FiniteMarket& market, std::span<const std::vector<double>> densities,
                              const UtilityFunction& uf, std::span<const double> wealths) {
    SandwichReport rep;
    const Modular mod(market, uf, ModularKind::EtaStar);
    for (std::size_t d = 0; d < densities.size(); ++d) {
        check_density(market, densities[d], d);
        const double lux = luxemburg_norm(mod, densities[d]);
        const double amem = amemiya_norm(mod, densities[d]);
        for (const double x : wealths) {
            SandwichRow row;
            row.density = d;
            row.x = x;
            row.luxemburg = lux;
            row.amemiya = amem;
            row.u_Q = classical_u_Q(market, uf, densities[d], x).u_Q;
            row.upper_margin = (1.0 + x) * lux - row.u_Q;
            row.lower_margin = row.u_Q - std::min(1.0, x) * amem;
            const double slack = rep.slack * std::max(1.0, std::abs(row.u_Q));
            row.holds = row.upper_margin >= -slack && row.lower_margin >= -slack;
            if (!row.holds) ++rep.violations;
            rep.rows.push_back(row);
        }
    }
    return rep;
}

TruncationReport truncation_sequence(const FiniteMarket& market, std::span<const double> h, double A,
                                     const UtilityFunction& uf, double x, int max_n) {
    if (h.size() != market.size()) throw ValidationError("truncation_sequence: length mismatch");
    if (!(A > 0.0)) throw DomainError("truncation_sequence: A must be positive");
    const auto p = market.probs();
    TruncationReport rep;
    for (int n = 1; n <= max_n; ++n) {
        const double threshold = n * A;
        KahanSum mass;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (h[i] >= threshold) mass.add(p[i]);
        }
        if (!(mass.value() > 0.0)) break;
        std::vector<double> z(h.size(), 0.0);
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (h[i] >= threshold) z[i] = 1.0 / mass.value();
        }
        TruncationStep step;
        step.n = n;
        step.threshold = threshold;
        step.support_probability = mass.value();
        std::vector<double> zh(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) zh[i] = z[i] * h[i];
        step.mean_h = kahan_dot(p, zh);
        // Renormalize away the rounding of 1 / mass.
        const double mean = kahan_dot(p, z);
        for (auto& v : z) v /= mean;
        step.u_Q = classical_u_Q(market, uf, z, x).u_Q;
        if (!rep.steps.empty()) {
            const auto& prev = rep.steps.back();
            if (step.support_probability > prev.support_probability) rep.support_decreasing = false;
            if (step.u_Q < prev.u_Q - 1e-12 * std::abs(prev.u_Q)) rep.u_nondecreasing = false;
        }
        if (step.mean_h < A) rep.constraint_holds = false;
        rep.steps.push_back(step);
    }
    return rep;
}

LeastFavourableComparison least_favourable_comparison(const FiniteMarket& market,
                                                      const ConstraintSet& constraints, double y) {
    LeastFavourableComparison cmp;
    cmp.Z_half = solve_density(market, constraints, 0.5, y);
    cmp.Z_third = solve_density(market, constraints, 1.0 / 3.0, y);
    for (std::size_t i = 0; i < cmp.Z_half.size(); ++i) {
        cmp.sup_difference = std::max(cmp.sup_difference, std::abs(cmp.Z_half[i] - cmp.Z_third[i]));
    }
    const auto rc = resolve_constraints(market, constraints);
    cmp.affine_residual_half = affine_residual(market, rc, cmp.Z_half);
    cmp.affine_residual_third = affine_residual(market, rc, cmp.Z_third);
    return cmp;
}

}  // namespace robustutil

#include "robustutil/robust_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "robustutil/errors.hpp"
#include "robustutil/log.hpp"
#include "robustutil/numeric.hpp"
#include "robustutil/parallel.hpp"

namespace robustutil {
namespace {

template <class E>
[[noreturn]] void rethrow_as(const E& e, const std::string& prefix) {
    throw E(prefix + e.what());
}

template <class F>
auto with_context(const std::string& prefix, F&& body) {
    try {
        return body();
    } catch (const InfeasibleModel& e) {
        rethrow_as(e, prefix);
    } catch (const UnboundedDual& e) {
        rethrow_as(e, prefix);
    } catch (const NonConvergence& e) {
        rethrow_as(e, prefix);
    } catch (const DomainError& e) {
        rethrow_as(e, prefix);
    } catch (const ValidationError& e) {
        rethrow_as(e, prefix);
    } catch (const ConvergenceError& e) {
        rethrow_as(e, prefix);
    }
}

double budget_of(std::span<const double> p, const UtilityFunction& uf, std::span<const double> z,
                 double y) {
    KahanSum acc;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] > 0.0) acc.add(p[i] * uf.marginal_inverse(y / z[i]));
    }
    return acc.value();
}

// phi(y) = v(y) + x y backed by warm-started dual solves.
class OuterObjective {
public:
    OuterObjective(const FiniteMarket& market, const ConstraintSet& constraints,
                   const UtilityFunction& uf, double x, const DualOptions& opts)
        : market_(market), constraints_(constraints), uf_(uf), x_(x), opts_(opts) {}

    struct Point {
        double y = 0.0;
        double phi = 0.0;
        DualSolution dual;
    };

    Point at(double y) {
        DualOptions o = opts_;
        if (last_) {
            const double ratio = last_->y / y;
            const double factor = uf_.is_power()
                                      ? std::pow(ratio, uf_.alpha() / (1.0 - uf_.alpha()))
                                      : ratio;
            DualPoint warm = last_->dual.point;
            for (auto& g : warm.g) g *= factor;
            warm.beta *= factor;
            o.warm_start = std::move(warm);
        }
        std::ostringstream prefix;
        prefix << "at y = " << y << ": ";
        Point pt;
        pt.y = y;
        pt.dual = with_context(prefix.str(),
                               [&] { return solve_dual(market_, constraints_, uf_, y, o); });
        pt.phi = pt.dual.value + x_ * y;
        ++solves_;
        iterations_ += pt.dual.iterations;
        last_ = pt;
        return pt;
    }

    double phi(double y) { return at(y).phi; }

    /// phi'(y) = x - E[I(y / Z^y)].
    double slope(const Point& pt) const {
        return x_ - budget_of(market_.probs(), uf_, pt.dual.Z, pt.y);
    }

    int solves() const { return solves_; }
    int iterations() const { return iterations_; }

private:
    const FiniteMarket& market_;
    const ConstraintSet& constraints_;
    const UtilityFunction& uf_;
    double x_;
    DualOptions opts_;
    std::optional<Point> last_;
    int solves_ = 0;
    int iterations_ = 0;
};

}  // namespace

VCurve dual_value_curve(const FiniteMarket& market, const ConstraintSet& constraints,
                        const UtilityFunction& uf, std::span<const double> y_grid,
                        const DualOptions& opts, unsigned threads) {
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
        if (!(y_grid[i] > 0.0) || !std::isfinite(y_grid[i])) {
            throw DomainError("y grid must be positive and finite");
        }
        if (i > 0 && !(y_grid[i] > y_grid[i - 1])) throw DomainError("y grid must be increasing");
    }
    VCurve curve;
    curve.points.resize(y_grid.size());
    parallel_for(y_grid.size(), threads, [&](std::size_t i) {
        const double y = y_grid[i];
        std::ostringstream prefix;
        prefix << "at y = " << y << ": ";
        const auto sol =
            with_context(prefix.str(), [&] { return solve_dual(market, constraints, uf, y, opts); });
        curve.points[i] = {y, sol.value};
    });
    const auto& pts = curve.points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double slack = 1e-9 * (1.0 + std::abs(pts[i - 1].v));
        if (pts[i].v > pts[i - 1].v + slack) curve.decreasing = false;
    }
    for (std::size_t i = 2; i < pts.size(); ++i) {
        const double s1 = (pts[i - 1].v - pts[i - 2].v) / (pts[i - 1].y - pts[i - 2].y);
        const double s2 = (pts[i].v - pts[i - 1].v) / (pts[i].y - pts[i - 1].y);
        if (s2 < s1 - 1e-9 * (1.0 + std::abs(s1))) curve.convex = false;
    }
    if (!curve.convex || !curve.decreasing) {
        log::warn("dual value curve fails the convexity or monotonicity check");
    }
    return curve;
}

ClassicalSolution classical_u_Q(const FiniteMarket& market, const UtilityFunction& uf,
                                std::span<const double> q_density, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("classical_u_Q: x must be positive");
    if (q_density.size() != market.size()) throw ValidationError("classical_u_Q: length mismatch");
    for (const double q : q_density) {
        if (!(q >= 0.0) || !std::isfinite(q)) {
            throw DomainError("classical_u_Q: density must be finite and >= 0");
        }
    }
    const auto p = market.probs();
    const double mean = kahan_dot(p, q_density);
    if (std::abs(mean - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "classical_u_Q: density must have mean 1 (got " << mean << ")";
        throw DomainError(os.str());
    }
    const auto budget = [&](double y) { return budget_of(p, uf, q_density, y); };

    double lo = 1.0;
    double hi = 1.0;
    while (budget(lo) < x) {
        lo *= 0.5;
        if (lo < 1e-300) {
            std::ostringstream os;
            os << "classical_u_Q: budget equation unsolvable; E[I(y/Z)] = " << budget(lo)
               << " < x = " << x << " at y = " << lo;
            throw ConvergenceError(os.str());
        }
    }
    while (budget(hi) > x) {
        hi *= 2.0;
        if (hi > 1e300) {
            std::ostringstream os;
            os << "classical_u_Q: budget equation unsolvable; E[I(y/Z)] = " << budget(hi)
               << " > x = " << x << " at y = " << hi;
            throw ConvergenceError(os.str());
        }
    }
    for (int it = 0; it < 300 && hi / lo - 1.0 > 1e-15; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (budget(mid) > x) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ClassicalSolution sol;
    sol.y_Q = std::sqrt(lo * hi);
    sol.X_Q.resize(q_density.size());
    KahanSum value;
    for (std::size_t i = 0; i < q_density.size(); ++i) {
        if (q_density[i] > 0.0) {
            sol.X_Q[i] = uf.marginal_inverse(sol.y_Q / q_density[i]);
            value.add(p[i] * q_density[i] * uf.value(sol.X_Q[i]));
        }
    }
    sol.u_Q = value.value();
    return sol;
}

RobustSolution solve_robust(const FiniteMarket& market, const ConstraintSet& constraints,
                            const UtilityFunction& uf, double x, const RobustOptions& opts) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("solve_robust: x must be positive");
    if (!(opts.y0 >= opts.y_min && opts.y0 <= opts.y_max)) {
        throw DomainError("solve_robust: y0 must lie in [y_min, y_max]");
    }
    OuterObjective obj(market, constraints, uf, x, opts.dual);
    const double s_min = std::log(opts.y_min);
    const double s_max = std::log(opts.y_max);
    const auto phi_s = [&](double s) { return obj.phi(std::exp(s)); };

    // Three-point bracket in s = log y.
    double step = 0.5;
    double a = std::log(opts.y0) - step;
    double b = std::log(opts.y0);
    double c = b + step;
    double fa = phi_s(a);
    double fb = phi_s(b);
    double fc = phi_s(c);
    while (!(fb <= fa && fb <= fc)) {
        step *= 2.0;
        if (fa < fc) {
            c = b;
            fc = fb;
            b = a;
            fb = fa;
            a = std::max(s_min, b - step);
            if (a >= b) {
                throw BracketFailure("no interior minimum of v(y) + x y for y >= " +
                                     std::to_string(opts.y_min));
            }
            fa = phi_s(a);
        } else {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            c = std::min(s_max, b + step);
            if (c <= b) {
                throw BracketFailure("no interior minimum of v(y) + x y for y <= " +
                                     std::to_string(opts.y_max));
            }
            fc = phi_s(c);
        }
    }
    const auto gs = golden_section_minimize(phi_s, a, c, opts.rel_width, 400);

    // Polish on phi'(y) = x - E[X(y)] so that the budget binds.
    const auto slope_at = [&](double s) {
        const auto pt = obj.at(std::exp(s));
        return obj.slope(pt);
    };
    double lo = gs.lo;
    double hi = gs.hi;
    double f_lo = slope_at(lo);
    double f_hi = slope_at(hi);
    for (int grow = 0; grow < 20 && f_lo > 0.0 && lo > s_min; ++grow) {
        lo -= (hi - lo) + 1e-6;
        f_lo = slope_at(lo);
    }
    for (int grow = 0; grow < 20 && f_hi < 0.0 && hi < s_max; ++grow) {
        hi += (hi - lo) + 1e-6;
        f_hi = slope_at(hi);
    }
    double s_hat = gs.x;
    if (f_lo <= 0.0 && f_hi >= 0.0) {
        // Illinois variant of regula falsi.
        int side = 0;
        for (int it = 0; it < 100; ++it) {
            const double s = f_hi != f_lo ? (lo * f_hi - hi * f_lo) / (f_hi - f_lo) : 0.5 * (lo + hi);
            const double fs = slope_at(s);
            s_hat = s;
            if (std::abs(fs) <= 1e-13 * x || hi - lo <= 1e-15 * (1.0 + std::abs(s))) break;
            if (fs < 0.0) {
                lo = s;
                f_lo = fs;
                if (side == -1) f_hi *= 0.5;
                side = -1;
            } else {
                hi = s;
                f_hi = fs;
                if (side == 1) f_lo *= 0.5;
                side = 1;
            }
        }
    } else {
        log::warn("solve_robust: derivative polish found no sign change; using the golden-section point");
    }

    const auto best = obj.at(std::exp(s_hat));
    RobustSolution sol;
    sol.x = x;
    sol.y_hat = best.y;
    sol.v_at_y_hat = best.dual.value;
    sol.u_value = best.dual.value + x * best.y;
    sol.Z_hat = best.dual.Z;
    sol.dual_point = best.dual.point;
    sol.X_hat.assign(sol.Z_hat.size(), 0.0);
    for (std::size_t i = 0; i < sol.Z_hat.size(); ++i) {
        if (sol.Z_hat[i] > 0.0) sol.X_hat[i] = uf.marginal_inverse(sol.y_hat / sol.Z_hat[i]);
    }

    auto& d = sol.diagnostics;
    const auto p = market.probs();
    const double u_scale = std::max(1.0, std::abs(sol.u_value));
    d.kkt = best.dual.kkt;
    d.budget_residual = std::abs(kahan_dot(p, sol.X_hat) - x) / x;
    const double z_mean = kahan_dot(p, sol.Z_hat);
    d.normalization_residual = std::abs(z_mean - 1.0);
    KahanSum wc;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (sol.Z_hat[i] > 0.0) wc.add(p[i] * sol.Z_hat[i] * uf.value(sol.X_hat[i]));
    }
    d.worst_case_value_residual = std::abs(wc.value() - sol.u_value) / u_scale;
    d.identity_residual = std::abs(sol.u_value - sol.v_at_y_hat - x * sol.y_hat) / u_scale;

    std::vector<double> q(sol.Z_hat);
    for (auto& v : q) v /= z_mean;
    d.saddle_gap = classical_u_Q(market, uf, q, x).u_Q - sol.u_value;

    const double delta = 1e-3 * sol.y_hat;
    const double phi_lo = obj.phi(sol.y_hat - delta);
    const double phi_hi = obj.phi(sol.y_hat + delta);
    d.superdifferential_margin = std::min(phi_lo, phi_hi) - sol.u_value;
    d.bracket_flatness = std::max(obj.phi(std::exp(gs.lo)), obj.phi(std::exp(gs.hi))) - sol.u_value;
    d.dual_solves = obj.solves();
    d.iterations = obj.iterations();

    d.invariants_hold = d.identity_residual <= 1e-9 && d.budget_residual <= 1e-7 &&
                        d.normalization_residual <= 1e-7 && d.worst_case_value_residual <= 1e-6 &&
                        d.saddle_gap >= -1e-6 && std::abs(d.saddle_gap) <= 1e-5 &&
                        d.superdifferential_margin >= -1e-9 * u_scale;
    if (!d.invariants_hold) {
        std::ostringstream os;
        os << "solve_robust: invariant check failed (budget " << d.budget_residual
           << ", normalization " << d.normalization_residual << ", worst-case value "
           << d.worst_case_value_residual << ", saddle gap " << d.saddle_gap << ")";
        log::warn(os.str());
    }
    return sol;
}

}  // namespace robustutil

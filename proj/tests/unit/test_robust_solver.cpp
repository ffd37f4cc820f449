#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "robustutil/errors.hpp"
#include "robustutil/robust_solver.hpp"

using namespace robustutil;
using doctest::Approx;

namespace {

const oracle::BlackScholes kBS{0.5, 1.0, 1.1, 1.0};

FiniteMarket bs_market(int nodes = 64) { return gauss_hermite_market({0.5, 1.0, 1.0, nodes}); }

ConstraintSet bs_constraint(double A) { return {{{"S_T", ConstraintKind::GE, A}}}; }

std::vector<double> probs_of(const FiniteMarket& m) { return {m.probs().begin(), m.probs().end()}; }

}  // namespace

TEST_CASE("value curve without constraints is the conjugate") {
    const FiniteMarket m({0.3, 0.7}, {});
    const auto uf = UtilityFunction::power(0.5);
    const std::vector<double> ys{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    const auto c = dual_value_curve(m, ConstraintSet{}, uf, ys);
    REQUIRE(c.points.size() == ys.size());
    for (const auto& pt : c.points) CHECK(std::abs(pt.v - 1.0 / pt.y) <= 1e-9);
    CHECK(c.convex);
    CHECK(c.decreasing);
}

TEST_CASE("value curve on the lognormal market") {
    const std::vector<double> ys{0.5, 1.0, 2.0};
    const auto c = dual_value_curve(bs_market(), bs_constraint(1.1), UtilityFunction::power(0.5), ys, {}, 3);
    for (const auto& pt : c.points) CHECK(std::abs(pt.v - 1.035208 / pt.y) <= 1e-3);
    CHECK(c.convex);
    CHECK(c.decreasing);
}

TEST_CASE("value curve is convex and decreasing on random instances") {
    oracle::Rng rng(41);
    const auto ys = logspace(0.1, 10.0, 25);
    for (int t = 0; t < 8; ++t) {
        const auto inst = oracle::random_instance(rng, static_cast<std::size_t>(rng.integer(3, 6)), 2);
        const auto c = dual_value_curve(inst.market, inst.constraints, UtilityFunction::power(0.4), ys);
        CHECK(c.convex);
        CHECK(c.decreasing);
        // Independent midpoint check on the returned data.
        for (std::size_t i = 1; i + 1 < c.points.size(); ++i) {
            const auto& a = c.points[i - 1];
            const auto& b = c.points[i];
            const auto& d = c.points[i + 1];
            const double chord = a.v + (d.v - a.v) * (b.y - a.y) / (d.y - a.y);
            CHECK(b.v <= chord + 1e-9 * (1.0 + std::abs(chord)));
        }
    }
}

TEST_CASE("value curve validates the grid and names the failing point") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    CHECK_THROWS_AS(dual_value_curve(m, bs_constraint(1.1), uf, std::vector<double>{1.0, 0.5}), DomainError);
    CHECK_THROWS_AS(dual_value_curve(m, bs_constraint(1.1), uf, std::vector<double>{-1.0, 0.5}), DomainError);
    DualOptions starved;
    starved.max_iter = 1;
    starved.newton = false;
    CHECK_THROWS_WITH_AS(dual_value_curve(m, bs_constraint(1.1), uf, std::vector<double>{2.0}, starved),
                         doctest::Contains("at y = 2"), NonConvergence);
    CHECK_THROWS_WITH_AS(dual_value_curve(m, bs_constraint(1e5), uf, std::vector<double>{3.0}),
                         doctest::Contains("at y = 3"), InfeasibleModel);
    // Feasible only through the top node, whose mass is about 1e-49.
    CHECK_THROWS_WITH_AS(dual_value_curve(m, bs_constraint(1e3), uf, std::vector<double>{3.0}),
                         doctest::Contains("at y = 3"), UnboundedDual);
}

TEST_CASE("robust solution on the lognormal market") {
    const auto m = bs_market();
    const auto sol = solve_robust(m, bs_constraint(1.1), UtilityFunction::power(0.5), 1.0);
    CHECK(std::abs(sol.y_hat - 1.017452) <= 1e-3);
    CHECK(std::abs(sol.u_value - 2.034904) <= 1e-3);
    CHECK(kBS.u() == Approx(2.034904).epsilon(1e-6));
    CHECK(kBS.y_hat() == Approx(1.017452).epsilon(1e-6));
    const auto s = m.observable("S_T");
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(std::abs(sol.X_hat[i] - kBS.X(s[i])) <= 1e-3 * std::max(1.0, kBS.X(s[i])));
        CHECK(std::abs(sol.Z_hat[i] - kBS.Z(s[i])) <= 1e-3);
    }
    const auto& d = sol.diagnostics;
    CHECK(d.invariants_hold);
    CHECK(std::abs(sol.u_value - sol.v_at_y_hat - sol.x * sol.y_hat) <= 1e-9 * std::abs(sol.u_value));
    CHECK(std::abs(expectation(m, sol.X_hat) - 1.0) <= 1e-7);
    CHECK(std::abs(expectation(m, sol.Z_hat) - 1.0) <= 1e-7);
    std::vector<double> zu(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) zu[i] = sol.Z_hat[i] * 2.0 * std::sqrt(sol.X_hat[i]);
    CHECK(expectation(m, zu) == Approx(sol.u_value).epsilon(1e-6));
    CHECK(d.superdifferential_margin >= -1e-12);
    CHECK(std::abs(d.saddle_gap) <= 1e-5);
}

TEST_CASE("unconstrained robust solution is the classical one") {
    const FiniteMarket m({0.25, 0.25, 0.5}, {});
    const auto sol = solve_robust(m, ConstraintSet{}, UtilityFunction::power(0.5), 1.0);
    CHECK(sol.u_value == Approx(2.0).epsilon(1e-9));
    for (const double z : sol.Z_hat) CHECK(z == Approx(1.0).epsilon(1e-9));
    for (const double x : sol.X_hat) CHECK(x == Approx(1.0).epsilon(1e-7));
}

TEST_CASE("classical value examples") {
    const FiniteMarket m({0.25, 0.25, 0.5}, {});
    const auto uf = UtilityFunction::power(0.5);
    const auto one = classical_u_Q(m, uf, std::vector<double>(3, 1.0), 1.0);
    CHECK(one.u_Q == Approx(2.0).epsilon(1e-10));
    for (const double x : one.X_Q) CHECK(x == Approx(1.0).epsilon(1e-9));

    // Zero state: no wealth there and the budget holds on the support.
    const std::vector<double> z{0.0, 2.0, 1.0};
    const auto r = classical_u_Q(m, uf, z, 1.5);
    CHECK(r.X_Q[0] == 0.0);
    CHECK(expectation(m, r.X_Q) == Approx(1.5).epsilon(1e-9));
    CHECK(r.u_Q == Approx(oracle::classical_power_value(probs_of(m), z, 0.5, 1.5)).epsilon(1e-9));

    const auto bm = bs_market();
    const auto sol = solve_robust(bm, bs_constraint(1.1), uf, 1.0);
    CHECK(std::abs(classical_u_Q(bm, uf, sol.Z_hat, 1.0).u_Q - 2.034904) <= 1e-3);

    CHECK_THROWS_AS(classical_u_Q(m, uf, std::vector<double>{1.0, 1.0}, 1.0), ValidationError);
    CHECK_THROWS_AS(classical_u_Q(m, uf, std::vector<double>{-1.0, 1.0, 2.0}, 1.0), DomainError);
    CHECK_THROWS_AS(classical_u_Q(m, uf, std::vector<double>(3, 1.0), 0.0), DomainError);
}

TEST_CASE("classical value agrees with the power closed form") {
    oracle::Rng rng(42);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(1, 10));
        const auto p = oracle::random_probs(rng, n);
        const auto z = oracle::random_density(rng, p, 0.05, 3.0);
        const double a = rng.uniform(0.15, 0.85);
        const double x = rng.log_uniform(0.01, 100.0);
        const auto r = classical_u_Q(FiniteMarket(p, {}), UtilityFunction::power(a), z, x);
        CHECK(r.u_Q == Approx(oracle::classical_power_value(p, z, a, x)).epsilon(1e-9));
        const auto w = oracle::classical_power_wealth(p, z, a, x);
        for (std::size_t i = 0; i < n; ++i) CHECK(r.X_Q[i] == Approx(w[i]).epsilon(1e-8));
    }
}

TEST_CASE("robust value is the conjugate of the value curve") {
    oracle::Rng rng(43);
    const auto inst = oracle::random_instance(rng, 5, 2);
    const auto uf = UtilityFunction::power(0.5);
    for (const double x : {0.5, 1.0, 3.0}) {
        const auto sol = solve_robust(inst.market, inst.constraints, uf, x);
        std::vector<double> ys;
        for (int k = -200; k <= 200; ++k) ys.push_back(sol.y_hat * std::exp(k * 1e-3));
        const auto c = dual_value_curve(inst.market, inst.constraints, uf, ys, {}, 4);
        double best = kInf;
        for (const auto& pt : c.points) best = std::min(best, pt.v + x * pt.y);
        CHECK(sol.u_value <= best + 1e-9 * best);
        CHECK(best - sol.u_value <= 1e-6 * best);
    }
}

TEST_CASE("tightening the constraint never lowers the value") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    // A larger bound shrinks the set of models, so the worst case improves.
    double prev = 0.0;
    for (const double A : {0.9, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25}) {
        const double u = solve_robust(m, bs_constraint(A), uf, 1.0).u_value;
        CHECK(u >= prev - 1e-9);
        prev = u;
        const oracle::BlackScholes bs{0.5, 1.0, std::max(A, 1.0), 1.0};
        CHECK(std::abs(u - bs.u()) <= 1e-3);
    }
}

TEST_CASE("robust value lies below every classical value") {
    oracle::Rng rng(44);
    const auto inst = oracle::random_instance(rng, 6, 2);
    const auto uf = UtilityFunction::power(0.5);
    const auto sol = solve_robust(inst.market, inst.constraints, uf, 1.0);
    CHECK(std::abs(classical_u_Q(inst.market, uf, sol.Z_hat, 1.0).u_Q - sol.u_value) <= 1e-5);
    const auto p = probs_of(inst.market);
    int drawn = 0;
    while (drawn < 20) {
        // Mix the anchor with a random density until it meets every constraint.
        const auto r = oracle::random_density(rng, p);
        const double w = rng.uniform(0.0, 1.0);
        std::vector<double> q(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) q[i] = w * r[i] + (1.0 - w) * inst.anchor[i];
        bool ok = true;
        for (const auto& c : inst.constraints.items) {
            const auto h = inst.market.observable(c.observable);
            std::vector<double> qh(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) qh[i] = q[i] * h[i];
            ok = ok && oracle::mean(p, qh) >= c.bound;
        }
        if (!ok) continue;
        ++drawn;
        CHECK(sol.u_value <= oracle::classical_power_value(p, q, 0.5, 1.0) + 1e-6);
    }
}

TEST_CASE("power utilities scale homogeneously") {
    oracle::Rng rng(45);
    for (const double a : {0.5, 0.3}) {
        const auto inst = oracle::random_instance(rng, 5, 2);
        const auto uf = UtilityFunction::power(a);
        const double base = solve_robust(inst.market, inst.constraints, uf, 1.0).u_value;
        for (const double c : {0.5, 2.0, 4.0}) {
            const double u = solve_robust(inst.market, inst.constraints, uf, c).u_value;
            CHECK(u == Approx(std::pow(c, a) * base).epsilon(1e-6));
        }
    }
}

TEST_CASE("bracket failure and input validation") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    RobustOptions narrow;
    narrow.y_max = 2.0;
    // y_hat = sqrt(K / x) is about 10 here.
    CHECK_THROWS_AS(solve_robust(m, bs_constraint(1.1), uf, 0.01, narrow), BracketFailure);
    CHECK_THROWS_AS(solve_robust(m, bs_constraint(1.1), uf, 0.0), DomainError);
    RobustOptions off;
    off.y0 = 1e9;
    CHECK_THROWS_AS(solve_robust(m, bs_constraint(1.1), uf, 1.0, off), DomainError);
    CHECK_THROWS_AS(solve_robust(m, bs_constraint(1e5), uf, 1.0), InfeasibleModel);
}

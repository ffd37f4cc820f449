#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "robustutil/dual_solver.hpp"
#include "robustutil/errors.hpp"

using namespace robustutil;
using doctest::Approx;

namespace {

const oracle::BlackScholes kBS{0.5, 1.0, 1.1, 1.0};

FiniteMarket bs_market(int nodes = 64) { return gauss_hermite_market({0.5, 1.0, 1.0, nodes}); }

ConstraintSet bs_constraint(double A) { return {{{"S_T", ConstraintKind::GE, A}}}; }

FiniteMarket scaled_market(const oracle::Instance& inst, double c) {
    FiniteMarket::ObservableMap obs;
    for (const auto& [id, h] : inst.market.observables()) {
        std::vector<double> s(h);
        for (auto& v : s) v *= c;
        obs.emplace(id, s);
    }
    return FiniteMarket(std::vector<double>(inst.market.probs().begin(), inst.market.probs().end()), obs);
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("dual objective at the origin") {
    oracle::Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        const auto inst = oracle::random_instance(rng, 5, 2);
        const auto r = dual_objective(inst.market, inst.constraints, UtilityFunction::power(0.4), 1.3,
                                      DualPoint{{0.0, 0.0}, 0.0});
        CHECK(r.value == 0.0);
        REQUIRE(r.gradient.size() == 3);
        CHECK(r.gradient[0] == inst.constraints.items[0].bound);
        CHECK(r.gradient[1] == inst.constraints.items[1].bound);
        CHECK(r.gradient[2] == 1.0);
    }
}

TEST_CASE("dual objective at the lognormal closed-form point") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    const DualPoint p{{kBS.g(1.0)}, kBS.beta(1.0)};
    CHECK(p.g[0] == Approx(0.704162).epsilon(1e-6));
    CHECK(p.beta == Approx(1.295838).epsilon(1e-6));
    const auto r = dual_objective(m, bs_constraint(1.1), uf, 1.0, p);
    CHECK(std::abs(r.gradient[0]) <= 2e-3);
    CHECK(std::abs(r.gradient[1]) <= 2e-3);
    CHECK(std::abs(r.value - 1.035208) <= 2e-3);
    CHECK_THROWS_AS(dual_objective(m, bs_constraint(1.1), uf, 0.0, p), DomainError);
    CHECK_THROWS_AS(dual_objective(m, bs_constraint(1.1), uf, 1.0, DualPoint{{}, 1.0}), ValidationError);
}

TEST_CASE("dual objective is -inf past the bound of a bounded utility") {
    CustomUtility spec;
    spec.value = [](double x) { return 1.0 - std::exp(-x); };
    spec.marginal = [](double x) { return std::exp(-x); };
    spec.upper_limit = 1.0;
    const auto uf = UtilityFunction::custom(spec);
    const FiniteMarket m({0.5, 0.5}, {{"h", {0.0, 2.0}}});
    const ConstraintSet cs{{{"h", ConstraintKind::GE, 1.2}}};
    CHECK(dual_objective(m, cs, uf, 1.0, DualPoint{{0.0}, 1.5}).value == -kInf);
    CHECK(std::isfinite(dual_objective(m, cs, uf, 1.0, DualPoint{{0.0}, 0.5}).value));
}

TEST_CASE("dual objective is concave along random segments") {
    oracle::Rng rng(32);
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(2, 6));
        const std::size_t mc = static_cast<std::size_t>(rng.integer(1, 2));
        const auto inst = oracle::random_instance(rng, n, mc);
        const auto uf = UtilityFunction::power(rng.uniform(0.2, 0.8));
        const double y = rng.log_uniform(0.1, 10.0);
        DualPoint a, b, mid;
        for (std::size_t j = 0; j < mc; ++j) {
            a.g.push_back(rng.uniform(0.0, 3.0));
            b.g.push_back(rng.uniform(0.0, 3.0));
            mid.g.push_back(0.5 * (a.g[j] + b.g[j]));
        }
        a.beta = rng.uniform(-2.0, 4.0);
        b.beta = rng.uniform(-2.0, 4.0);
        mid.beta = 0.5 * (a.beta + b.beta);
        const double fa = dual_objective(inst.market, inst.constraints, uf, y, a).value;
        const double fb = dual_objective(inst.market, inst.constraints, uf, y, b).value;
        const double fm = dual_objective(inst.market, inst.constraints, uf, y, mid).value;
        CHECK(fm >= 0.5 * (fa + fb) - 1e-10 * (1.0 + std::abs(fa) + std::abs(fb)));
    }
}

TEST_CASE("dual gradient matches central differences") {
    oracle::Rng rng(33);
    int checked = 0;
    while (checked < 100) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(2, 6));
        const auto inst = oracle::random_instance(rng, n, 2);
        const auto uf = UtilityFunction::power(rng.uniform(0.2, 0.8));
        const double y = rng.log_uniform(0.2, 5.0);
        DualPoint p{{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)}, rng.uniform(0.5, 3.0)};
        const auto r = dual_objective(inst.market, inst.constraints, uf, y, p);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto f = [&](double s) {
                DualPoint q = p;
                (k < 2 ? q.g[k] : q.beta) = s;
                return dual_objective(inst.market, inst.constraints, uf, y, q).value;
            };
            const double fd = oracle::central_difference(f, k < 2 ? p.g[k] : p.beta, 1e-6);
            CHECK(std::abs(r.gradient[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
        ++checked;
    }
}

TEST_CASE("solve_dual on the lognormal market") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    const auto sol = solve_dual(m, bs_constraint(1.1), uf, 1.0);
    CHECK(sol.converged);
    CHECK(std::abs(sol.value - kBS.v(1.0)) <= 1e-3);
    CHECK(kBS.v(1.0) == Approx(1.035208).epsilon(1e-6));
    const auto s = m.observable("S_T");
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(std::abs(sol.Z[i] - kBS.Z(s[i])) <= 1e-3);
        CHECK(sol.Z[i] >= 0.0);
    }
    CHECK(sol.kkt.max_residual() <= 1e-8);
    CHECK(std::abs(expectation(m, sol.Z) - 1.0) <= 1e-8);

    const auto rep = verify_optimality(m, bs_constraint(1.1), uf, 1.0, sol);
    CHECK(rep.max_residual() <= 1e-6);

    // One state pushed up by 0.1 and the density renormalized.
    auto bad = sol;
    const auto probs = m.probs();
    const std::size_t k = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    bad.Z[k] += 0.1;
    const double mass = expectation(m, bad.Z);
    for (auto& z : bad.Z) z /= mass;
    CHECK(verify_optimality(m, bs_constraint(1.1), uf, 1.0, bad).pointwise >= 0.05);
}

TEST_CASE("inactive constraint returns the reference measure") {
    const auto m = bs_market();
    const auto uf = UtilityFunction::power(0.5);
    for (const double y : {0.5, 1.0, 3.0}) {
        const auto sol = solve_dual(m, bs_constraint(0.9), uf, y);
        CHECK(sol.point.g[0] == Approx(0.0).epsilon(1e-12));
        CHECK(sol.point.beta == Approx(2.0 / y).epsilon(1e-9));
        for (const double z : sol.Z) CHECK(z == Approx(1.0).epsilon(1e-9));
        CHECK(sol.value == Approx(uf.conjugate(y)).epsilon(1e-9));
    }
}

TEST_CASE("two-state equality satisfied by the reference measure") {
    const FiniteMarket m({0.5, 0.5}, {{"h", {0.0, 2.0}}});
    const ConstraintSet cs{{{"h", ConstraintKind::EQ, 1.0}}};
    const auto uf = UtilityFunction::power(0.5);
    const auto sol = solve_dual(m, cs, uf, 2.0);
    CHECK(sol.Z[0] == Approx(1.0).epsilon(1e-9));
    CHECK(sol.Z[1] == Approx(1.0).epsilon(1e-9));
    CHECK(sol.value == Approx(uf.conjugate(2.0)).epsilon(1e-9));
    CHECK(std::abs(sol.point.g[0]) <= 1e-9);
}

TEST_CASE("unconstrained optimality residuals vanish") {
    const FiniteMarket m({0.2, 0.3, 0.5}, {});
    const auto uf = UtilityFunction::power(0.3);
    const auto sol = solve_dual(m, ConstraintSet{}, uf, 0.7);
    for (const double z : sol.Z) CHECK(z == Approx(1.0).epsilon(1e-12));
    CHECK(verify_optimality(m, ConstraintSet{}, uf, 0.7, sol).max_residual() <= 1e-12);
    const auto d = density_from_point(m, ConstraintSet{}, uf, 0.7, sol.point);
    CHECK(d == sol.Z);
}

TEST_CASE("strong duality against the primal oracle") {
    oracle::Rng rng(34);
    for (int t = 0; t < 15; ++t) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(3, 6));
        const std::size_t mc = static_cast<std::size_t>(rng.integer(1, 2));
        const auto inst = oracle::random_instance(rng, n, mc);
        const auto uf = UtilityFunction::power(t % 2 == 0 ? 0.5 : 0.3);
        const double y = rng.log_uniform(0.5, 2.0);
        const auto sol = solve_dual(inst.market, inst.constraints, uf, y);
        PrimalOracleOptions po;
        po.starts = 30;
        const auto primal = primal_brute_force(inst.market, inst.constraints, uf, y, po);
        CHECK(std::abs(sol.value - primal.value) <= 1e-6 * (1.0 + std::abs(sol.value)));
        // Independent evaluation of E[gamma*_y(Z)] at the recovered density.
        const oracle::Power pw{uf.alpha()};
        const std::vector<double> p(inst.market.probs().begin(), inst.market.probs().end());
        double direct = 0.0;
        for (std::size_t i = 0; i < n; ++i) direct += p[i] * pw.gamma_star(y, sol.Z[i]);
        CHECK(direct == Approx(sol.value).epsilon(1e-7));
    }
}

TEST_CASE("primal oracle: unconstrained minimum and guards") {
    const FiniteMarket m({0.1, 0.2, 0.3, 0.4}, {});
    const auto uf = UtilityFunction::power(0.5);
    const auto r = primal_brute_force(m, ConstraintSet{}, uf, 1.5);
    CHECK(r.value == Approx(uf.conjugate(1.5)).epsilon(1e-9));
    CHECK(r.grid_value < kInf);
    std::vector<double> p(13, 1.0 / 13.0);
    CHECK_THROWS_AS(primal_brute_force(FiniteMarket(p, {}), ConstraintSet{}, uf, 1.0), DimensionGuard);
    const FiniteMarket two({0.5, 0.5}, {{"h", {0.0, 2.0}}});
    CHECK_THROWS_AS(primal_brute_force(two, {{{"h", ConstraintKind::GE, 3.0}}}, uf, 1.0), InfeasibleModel);
}

TEST_CASE("recovered density does not depend on the seed") {
    oracle::Rng rng(35);
    for (int t = 0; t < 10; ++t) {
        const auto inst = oracle::random_instance(rng, 5, 2);
        const auto uf = UtilityFunction::power(0.5);
        DualOptions a, b;
        a.seed = 1;
        b.seed = 987654321;
        b.warm_start = DualPoint{{rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)}, rng.uniform(-1.0, 5.0)};
        const auto sa = solve_dual(inst.market, inst.constraints, uf, 1.0, a);
        const auto sb = solve_dual(inst.market, inst.constraints, uf, 1.0, b);
        CHECK(sup_diff(sa.Z, sb.Z) <= 1e-6);
        CHECK(sa.value == Approx(sb.value).epsilon(1e-9));
    }
}

TEST_CASE("constraint scaling leaves the density unchanged") {
    oracle::Rng rng(36);
    for (int t = 0; t < 10; ++t) {
        const auto inst = oracle::random_instance(rng, 4, 2);
        const auto uf = UtilityFunction::power(0.4);
        const double c = rng.log_uniform(0.01, 100.0);
        ConstraintSet scaled = inst.constraints;
        for (auto& item : scaled.items) item.bound *= c;
        const auto m2 = scaled_market(inst, c);
        const auto s1 = solve_dual(inst.market, inst.constraints, uf, 1.0);
        const auto s2 = solve_dual(m2, scaled, uf, 1.0);
        CHECK(sup_diff(s1.Z, s2.Z) <= 1e-8);
        CHECK(std::abs(s1.value - s2.value) <= 1e-8 * (1.0 + std::abs(s1.value)));
        for (std::size_t j = 0; j < s1.point.g.size(); ++j) {
            CHECK(std::abs(s2.point.g[j] * c - s1.point.g[j]) <= 1e-6 * (1.0 + s1.point.g[j]));
        }
    }
}

TEST_CASE("density_from_point uses the positive part") {
    const FiniteMarket m({0.5, 0.5}, {{"h", {-1.0, 1.0}}});
    const ConstraintSet cs{{{"h", ConstraintKind::GE, 0.5}}};
    const auto uf = UtilityFunction::power(0.5);
    // w = (0, 2): Z = y (U^-1)'(w+) = y w / 2.
    const auto z = density_from_point(m, cs, uf, 1.5, DualPoint{{1.0}, 1.0});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == Approx(1.5));
}

TEST_CASE("infeasible and degenerate models are rejected") {
    const FiniteMarket m({0.5, 0.5}, {{"h", {0.0, 2.0}}});
    const auto uf = UtilityFunction::power(0.5);
    CHECK_THROWS_AS(solve_dual(m, {{{"h", ConstraintKind::GE, 3.0}}}, uf, 1.0), InfeasibleModel);
    // Only Z = (0, 2) is feasible: no interior point.
    CHECK_THROWS_AS(solve_dual(m, {{{"h", ConstraintKind::GE, 2.0}}}, uf, 1.0), InfeasibleModel);
    CHECK_THROWS_AS(solve_dual(m, {{{"h", ConstraintKind::GE, 1.0}}}, uf, -1.0), DomainError);
    DualOptions bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(solve_dual(m, {{{"h", ConstraintKind::GE, 1.0}}}, uf, 1.0, bad), DomainError);
}

TEST_CASE("multistart and threads give identical results") {
    oracle::Rng rng(37);
    const auto inst = oracle::random_instance(rng, 6, 2);
    const auto uf = UtilityFunction::power(0.5);
    DualOptions one, many;
    many.threads = 4;
    const auto a = solve_dual(inst.market, inst.constraints, uf, 1.0, one);
    const auto b = solve_dual(inst.market, inst.constraints, uf, 1.0, many);
    CHECK(a.Z == b.Z);
    CHECK(a.value == b.value);
}

#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "robustutil/lp.hpp"
#include "robustutil/numeric.hpp"
#include "robustutil/parallel.hpp"

using namespace robustutil;

TEST_CASE("kahan sum recovers small terms lost by naive summation") {
    KahanSum acc;
    double naive = 0.0;
    acc.add(1.0);
    naive += 1.0;
    for (int i = 0; i < 1000000; ++i) {
        acc.add(1e-16);
        naive += 1e-16;
    }
    CHECK(naive == 1.0);
    CHECK(acc.value() == doctest::Approx(1.0 + 1e-10).epsilon(1e-15));
}

TEST_CASE("kahan sum propagates infinities") {
    KahanSum acc;
    acc.add(1.0);
    acc.add(kInf);
    CHECK(acc.value() == kInf);
    acc.add(-kInf);
    CHECK(std::isnan(acc.value()));
}

TEST_CASE("kahan_dot matches a long double reference") {
    oracle::Rng rng(3);
    std::vector<double> a(1000), b(1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(-1.0, 1.0);
        b[i] = rng.uniform(-1e3, 1e3);
    }
    long double ref = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) ref += static_cast<long double>(a[i]) * b[i];
    CHECK(kahan_dot(a, b) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
}

TEST_CASE("logspace endpoints and ratios") {
    const auto g = logspace(1e-6, 1e6, 13);
    REQUIRE(g.size() == 13);
    CHECK(g.front() == doctest::Approx(1e-6));
    CHECK(g.back() == doctest::Approx(1e6));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(10.0));
}

TEST_CASE("golden section finds the vertex of a parabola") {
    const auto r = golden_section_minimize([](double x) { return (x - 0.3) * (x - 0.3) + 2.0; }, -5.0, 5.0, 1e-10);
    // f(0.3 + d) rounds to 2 once d^2 < eps * 2.
    CHECK(std::abs(r.x - 0.3) <= 2.0 * std::sqrt(2.0 * std::numeric_limits<double>::epsilon()));
    CHECK(r.fx == doctest::Approx(2.0));
    CHECK(r.hi - r.lo <= 1e-9);
}

TEST_CASE("simplex projection: feasibility and optimality against sampling") {
    oracle::Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const int n = rng.integer(1, 6);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
        const auto w = project_to_simplex(v);
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        for (const double x : w) CHECK(x >= 0.0);
        double best = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) best += (w[i] - v[i]) * (w[i] - v[i]);
        // No random simplex point is closer.
        for (int s = 0; s < 50; ++s) {
            std::vector<double> q(v.size());
            double sum = 0.0;
            for (auto& x : q) sum += (x = -std::log(rng.uniform(1e-12, 1.0)));
            double d = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) d += (q[i] / sum - v[i]) * (q[i] / sum - v[i]);
            CHECK(d >= best - 1e-12);
        }
    }
}

TEST_CASE("lp: optimal vertex of a small program") {
    // min -x1 - 2 x2  s.t. x1 + x2 + s1 = 4, x2 + s2 = 3
    lp::StandardForm f;
    f.A = {{1, 1, 1, 0}, {0, 1, 0, 1}};
    f.b = {4, 3};
    f.c = {-1, -2, 0, 0};
    const auto r = lp::solve(f);
    REQUIRE(r.status == lp::Status::Optimal);
    CHECK(r.objective == doctest::Approx(-7.0));
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(3.0));
}

TEST_CASE("lp: infeasible and unbounded programs") {
    lp::StandardForm infeasible;
    infeasible.A = {{1, 1}};
    infeasible.b = {-1};
    infeasible.c = {0, 0};
    CHECK(lp::solve(infeasible).status == lp::Status::Infeasible);

    lp::StandardForm unbounded;
    unbounded.A = {{1, -1}};
    unbounded.b = {1};
    unbounded.c = {0, -1};
    CHECK(lp::solve(unbounded).status == lp::Status::Unbounded);
}

TEST_CASE("lp: degenerate program terminates") {
    lp::StandardForm f;
    f.A = {{1, 1, 1, 0, 0}, {1, 0, 0, 1, 0}, {0, 1, 0, 0, 1}};
    f.b = {1, 1, 0};
    f.c = {-1, -1, 0, 0, 0};
    const auto r = lp::solve(f);
    REQUIRE(r.status == lp::Status::Optimal);
    CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
    for (const unsigned threads : {1u, 2u, 7u}) {
        std::vector<int> hits(101, 0);
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
        for (const int h : hits) CHECK(h == 1);
    }
    CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "robustutil/dual_solver.hpp"
#include "robustutil/orlicz.hpp"
#include "robustutil/robust_solver.hpp"
#include "robustutil/verifier.hpp"

using namespace robustutil;

namespace {

const BSOracle kOracle{};

void BM_GaussHermiteRule(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(gauss_hermite_rule(n));
}
BENCHMARK(BM_GaussHermiteRule)->Arg(16)->Arg(64)->Arg(256);

void BM_SolveDual(benchmark::State& state) {
    const auto m = gauss_hermite_market(bs_market_spec(kOracle, static_cast<int>(state.range(0))));
    const auto cs = bs_constraints(kOracle);
    const auto uf = UtilityFunction::power(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(solve_dual(m, cs, uf, 1.0));
}
BENCHMARK(BM_SolveDual)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_SolveRobust(benchmark::State& state) {
    const auto m = gauss_hermite_market(bs_market_spec(kOracle, static_cast<int>(state.range(0))));
    const auto cs = bs_constraints(kOracle);
    const auto uf = UtilityFunction::power(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(solve_robust(m, cs, uf, 1.0));
}
BENCHMARK(BM_SolveRobust)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Norms(benchmark::State& state) {
    const auto m = gauss_hermite_market(bs_market_spec(kOracle, 64));
    const Modular mod(m, UtilityFunction::power(0.5), ModularKind::EtaStar);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    std::vector<double> z(m.size());
    for (auto& v : z) v = nd(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(luxemburg_norm(mod, z));
        benchmark::DoNotOptimize(amemiya_norm(mod, z));
    }
}
BENCHMARK(BM_Norms)->Unit(benchmark::kMicrosecond);

void BM_InequalityBattery(benchmark::State& state) {
    const auto m = gauss_hermite_market(bs_market_spec(kOracle, 64));
    const auto uf = UtilityFunction::power(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(inequality_battery(m, uf, 100));
}
BENCHMARK(BM_InequalityBattery)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "robustutil/market.hpp"
#include "robustutil/utility.hpp"

namespace robustutil {

enum class ModularKind {
    /// E[ |Z| V(Y / |Z|) ]
    EtaStar,
    /// E[ Y U^{-1}(|Z|) ]
    Eta,
};

/// Convex modular on the finite market generated by eta*_Y or eta_Y for a
/// fixed deflator Y (all ones in the complete case).
class Modular {
public:
    /// Throws ValidationError unless the deflator is componentwise >= 0 with
    /// E[Y] <= 1. An empty deflator means Y = 1.
    Modular(const FiniteMarket& market, UtilityFunction uf, ModularKind kind,
            std::vector<double> deflator = {});

    ModularKind kind() const { return kind_; }
    const UtilityFunction& utility() const { return uf_; }
    std::span<const double> probs() const { return probs_; }
    std::span<const double> deflator() const { return deflator_; }
    std::size_t size() const { return probs_.size(); }

    /// Extended-real modular value; even, convex, zero at zero.
    double operator()(std::span<const double> z) const;

private:
    std::vector<double> probs_;
    UtilityFunction uf_;
    ModularKind kind_;
    std::vector<double> deflator_;
};

double modular_value(const Modular& mod, std::span<const double> z);

/// inf{ beta > 0 : modular(Z / beta) <= 1 }, by bisection on log beta.
/// Returns the upper end of the final bracket, +inf if no beta <= 1e300 works.
double luxemburg_norm(const Modular& mod, std::span<const double> z);

/// inf_{k>0} (1 + modular(k Z)) / k, by golden-section search on log k.
double amemiya_norm(const Modular& mod, std::span<const double> z);

/// Bound modular(2Z) <= K modular(Z) + E[h] implied by the doubling
/// condition on V: K = 2a + 2b and h = 2bY (1 + 1 / V^{-1}(1)).
/// EtaStar modulars only.
struct Delta2ModularBound {
    double K = 0.0;
    std::vector<double> h;
};

Delta2ModularBound delta2_modular_bound(const Modular& mod, const Delta2Constants& c);

/// Convex hull of finitely many deflators; stands in for the deflator set
/// of a one-period incomplete market.
struct DeflatorHull {
    std::vector<std::vector<double>> vertices;
};

struct IncompleteModularResult {
    double value = kInf;
    std::vector<double> deflator;
    /// Convex weights of the minimizer (hull variant only).
    std::vector<double> weights;
};

/// min over a finite deflator family of E[ |Z| V(Y / |Z|) ].
IncompleteModularResult modular_I_incomplete(const FiniteMarket& market, const UtilityFunction& uf,
                                             std::span<const std::vector<double>> deflators,
                                             std::span<const double> z);

struct HullSearchOptions {
    int multistarts = 50;
    int max_iter = 2000;
    std::uint64_t seed = 42;
};

/// min over the convex hull, by projected gradient with Armijo backtracking
/// on the simplex of convex weights.
IncompleteModularResult modular_I_incomplete(const FiniteMarket& market, const UtilityFunction& uf,
                                             const DeflatorHull& hull, std::span<const double> z,
                                             const HullSearchOptions& opts = {});

enum class BatteryCheck {
    HolderAmemiyaLuxemburg,  // |E[XZ]| <= |Z|^a_I |X|^l_J
    HolderLuxemburgAmemiya,  // |E[XZ]| <= |Z|^l_I |X|^a_J
    HolderLuxemburg,         // |E[XZ]| <= 2 |Z|^l_I |X|^l_J
    Young,                   // I(Z) + J(X) >= E[XZ]
    NormOrderI,              // |Z|^l_I <= |Z|^a_I <= 2 |Z|^l_I
    NormOrderJ,              // |X|^l_J <= |X|^a_J <= 2 |X|^l_J
    Count,
};

const char* battery_check_name(BatteryCheck check);

struct BatteryReport {
    std::size_t samples = 0;
    /// Violations and worst normalized margin (rhs - lhs) / max(1, |rhs|),
    /// indexed by BatteryCheck.
    std::vector<std::size_t> violations;
    std::vector<double> worst_margin;
    double slack = 1e-9;

    std::size_t total_violations() const;
};

/// Draws `samples` random (X, Z) pairs on the complete-case modulars (Y = 1)
/// and checks the Holder, Young and norm-order inequalities.
BatteryReport inequality_battery(const FiniteMarket& market, const UtilityFunction& uf,
                                 std::size_t samples, std::uint64_t seed = 42,
                                 unsigned threads = 1);

}  // namespace robustutil

#include "robustutil/orlicz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "robustutil/errors.hpp"
#include "robustutil/numeric.hpp"
#include "robustutil/parallel.hpp"

namespace robustutil {
namespace {

bool all_zero(std::span<const double> z) {
    return std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; });
}

void check_deflator(std::span<const double> probs, std::span<const double> y) {
    if (y.size() != probs.size()) throw ValidationError("deflator length does not match market");
    for (const double v : y) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("deflator must be finite and componentwise >= 0");
        }
    }
    if (kahan_dot(probs, y) > 1.0 + 1e-12) throw ValidationError("deflator must satisfy E[Y] <= 1");
}

// E[ |Z| V(Y/|Z|) ] for a given deflator.
double eta_star_value(std::span<const double> probs, const UtilityFunction& uf,
                      std::span<const double> y, std::span<const double> z) {
    KahanSum acc;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double a = std::abs(z[i]);
        if (a == 0.0) continue;
        const double v = gamma_star(uf, y[i], a);
        if (is_pos_inf(v)) return kInf;
        acc.add(probs[i] * v);
    }
    return acc.value();
}

// d/dY_i of the eta* integrand is V'(Y_i/|Z_i|) = -I(Y_i/|Z_i|).
std::vector<double> eta_star_deflator_gradient(std::span<const double> probs,
                                               const UtilityFunction& uf,
                                               std::span<const double> y,
                                               std::span<const double> z) {
    std::vector<double> g(z.size(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double a = std::abs(z[i]);
        if (a == 0.0 || y[i] <= 0.0) continue;
        g[i] = -probs[i] * uf.marginal_inverse(y[i] / a);
    }
    return g;
}

}  // namespace

Modular::Modular(const FiniteMarket& market, UtilityFunction uf, ModularKind kind,
                 std::vector<double> deflator)
    : probs_(market.probs().begin(), market.probs().end()),
      uf_(std::move(uf)),
      kind_(kind),
      deflator_(std::move(deflator)) {
    if (deflator_.empty()) deflator_.assign(probs_.size(), 1.0);
    check_deflator(probs_, deflator_);
}

double Modular::operator()(std::span<const double> z) const {
    if (z.size() != probs_.size()) throw ValidationError("modular: vector length mismatch");
    if (kind_ == ModularKind::EtaStar) return eta_star_value(probs_, uf_, deflator_, z);
    KahanSum acc;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double v = gamma(uf_, deflator_[i], z[i]);
        if (is_pos_inf(v)) return kInf;
        acc.add(probs_[i] * v);
    }
    return acc.value();
}

double modular_value(const Modular& mod, std::span<const double> z) { return mod(z); }

double luxemburg_norm(const Modular& mod, std::span<const double> z) {
    for (const double v : z) {
        if (!std::isfinite(v)) throw DomainError("luxemburg_norm: non-finite entry");
    }
    if (all_zero(z)) return 0.0;
    std::vector<double> scaled(z.size());
    const auto fits = [&](double beta) {
        for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = z[i] / beta;
        return mod(scaled) <= 1.0;
    };
    double max_abs = 0.0;
    for (const double v : z) max_abs = std::max(max_abs, std::abs(v));

    double lo = max_abs;
    double hi = max_abs;
    if (fits(max_abs)) {
        do {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-300) return hi;
        } while (fits(lo));
    } else {
        do {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) return kInf;
        } while (!fits(hi));
    }
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-12; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (fits(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

double amemiya_norm(const Modular& mod, std::span<const double> z) {
    for (const double v : z) {
        if (!std::isfinite(v)) throw DomainError("amemiya_norm: non-finite entry");
    }
    if (all_zero(z)) return 0.0;
    const double lux = luxemburg_norm(mod, z);
    if (is_pos_inf(lux)) return kInf;

    std::vector<double> scaled(z.size());
    double best = kInf;
    // Objective in s = log k; infinite probes are skipped by comparison.
    const auto objective = [&](double s) {
        const double k = std::exp(s);
        for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = k * z[i];
        const double m = mod(scaled);
        const double v = is_pos_inf(m) ? kInf : (1.0 + m) / k;
        best = std::min(best, v);
        return v;
    };

    const double s0 = -std::log(lux);
    double step = 0.5;
    double a = s0 - step;
    double b = s0;
    double c = s0 + step;
    double fa = objective(a);
    double fb = objective(b);
    double fc = objective(c);
    for (int it = 0; it < 2000 && !(fb <= fa && fb <= fc); ++it) {
        step *= 2.0;
        if (fa < fb) {
            c = b;
            fc = fb;
            b = a;
            fb = fa;
            a = b - step;
            fa = objective(a);
        } else {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            c = b + step;
            fc = objective(c);
        }
    }
    golden_section_minimize(objective, a, c, 1e-10, 400);
    return best;
}

Delta2ModularBound delta2_modular_bound(const Modular& mod, const Delta2Constants& c) {
    if (mod.kind() != ModularKind::EtaStar) {
        throw DomainError("delta2_modular_bound applies to EtaStar modulars");
    }
    const auto& uf = mod.utility();
    // V^{-1}(1): V is strictly decreasing from sup U to 0.
    double lo = 1.0;
    double hi = 1.0;
    while (uf.conjugate(lo) < 1.0) {
        lo *= 0.5;
        if (lo < 1e-300) throw ConvergenceError("V^{-1}(1): no bracket");
    }
    while (uf.conjugate(hi) > 1.0) {
        hi *= 2.0;
        if (hi > 1e300) throw ConvergenceError("V^{-1}(1): no bracket");
    }
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (uf.conjugate(mid) > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double v_inv_one = std::sqrt(lo * hi);
    Delta2ModularBound bound;
    bound.K = 2.0 * c.a + 2.0 * c.b;
    bound.h.resize(mod.size());
    const auto y = mod.deflator();
    for (std::size_t i = 0; i < mod.size(); ++i) {
        bound.h[i] = 2.0 * c.b * y[i] * (1.0 + 1.0 / v_inv_one);
    }
    return bound;
}

IncompleteModularResult modular_I_incomplete(const FiniteMarket& market, const UtilityFunction& uf,
                                             std::span<const std::vector<double>> deflators,
                                             std::span<const double> z) {
    if (deflators.empty()) throw DomainError("modular_I_incomplete: empty deflator set");
    if (z.size() != market.size()) throw ValidationError("modular_I_incomplete: length mismatch");
    const auto probs = market.probs();
    IncompleteModularResult best;
    for (const auto& y : deflators) {
        check_deflator(probs, y);
        const double v = eta_star_value(probs, uf, y, z);
        if (best.deflator.empty() || v < best.value) {
            best.value = v;
            best.deflator = y;
        }
    }
    return best;
}

IncompleteModularResult modular_I_incomplete(const FiniteMarket& market, const UtilityFunction& uf,
                                             const DeflatorHull& hull, std::span<const double> z,
                                             const HullSearchOptions& opts) {
    const auto& verts = hull.vertices;
    if (verts.empty()) throw DomainError("modular_I_incomplete: empty deflator hull");
    if (z.size() != market.size()) throw ValidationError("modular_I_incomplete: length mismatch");
    const auto probs = market.probs();
    for (const auto& v : verts) check_deflator(probs, v);
    const std::size_t k = verts.size();
    const std::size_t n = market.size();

    const auto mix = [&](std::span<const double> w) {
        std::vector<double> y(n, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < n; ++i) y[i] += w[j] * verts[j][i];
        }
        return y;
    };
    const auto value_at = [&](std::span<const double> w) {
        const auto y = mix(w);
        return eta_star_value(probs, uf, y, z);
    };
    const auto gradient_at = [&](std::span<const double> w) {
        const auto y = mix(w);
        const auto gy = eta_star_deflator_gradient(probs, uf, y, z);
        std::vector<double> g(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) g[j] = kahan_dot(gy, verts[j]);
        return g;
    };

    std::mt19937_64 rng(opts.seed);
    std::exponential_distribution<double> expo(1.0);
    IncompleteModularResult best;
    for (int start = 0; start < std::max(1, opts.multistarts); ++start) {
        std::vector<double> w(k);
        if (start == 0) {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
        } else {
            double total = 0.0;
            for (auto& wj : w) total += (wj = expo(rng));
            for (auto& wj : w) wj /= total;
        }
        double fw = value_at(w);
        double step = 1.0;
        for (int it = 0; it < opts.max_iter && std::isfinite(fw); ++it) {
            const auto g = gradient_at(w);
            bool accepted = false;
            std::vector<double> trial(k);
            for (int ls = 0; ls < 60; ++ls) {
                std::vector<double> moved(k);
                for (std::size_t j = 0; j < k; ++j) moved[j] = w[j] - step * g[j];
                trial = project_to_simplex(moved);
                double decrease = 0.0;
                for (std::size_t j = 0; j < k; ++j) decrease += g[j] * (trial[j] - w[j]);
                const double ft = value_at(trial);
                if (std::isfinite(ft) && ft <= fw + 1e-4 * decrease) {
                    accepted = true;
                    double moved_norm = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        moved_norm = std::max(moved_norm, std::abs(trial[j] - w[j]));
                    }
                    w = trial;
                    const double prev = fw;
                    fw = ft;
                    step *= 2.0;
                    if (moved_norm < 1e-14 || prev - fw <= 1e-16 * (1.0 + std::abs(fw))) {
                        it = opts.max_iter;
                    }
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        if (best.weights.empty() || fw < best.value) {
            best.value = fw;
            best.weights = w;
        }
    }
    best.deflator = mix(best.weights);
    return best;
}

const char* battery_check_name(BatteryCheck check) {
    switch (check) {
        case BatteryCheck::HolderAmemiyaLuxemburg: return "holder |Z|^a_I |X|^l_J";
        case BatteryCheck::HolderLuxemburgAmemiya: return "holder |Z|^l_I |X|^a_J";
        case BatteryCheck::HolderLuxemburg: return "holder 2 |Z|^l_I |X|^l_J";
        case BatteryCheck::Young: return "young I(Z) + J(X) >= E[XZ]";
        case BatteryCheck::NormOrderI: return "norm order on I";
        case BatteryCheck::NormOrderJ: return "norm order on J";
        case BatteryCheck::Count: break;
    }
    return "?";
}

std::size_t BatteryReport::total_violations() const {
    std::size_t total = 0;
    for (const auto v : violations) total += v;
    return total;
}

BatteryReport inequality_battery(const FiniteMarket& market, const UtilityFunction& uf,
                                 std::size_t samples, std::uint64_t seed, unsigned threads) {
    if (samples == 0) throw DomainError("inequality_battery: samples must be >= 1");
    const Modular mod_i(market, uf, ModularKind::EtaStar);
    const Modular mod_j(market, uf, ModularKind::Eta);
    const std::size_t n = market.size();
    constexpr auto kChecks = static_cast<std::size_t>(BatteryCheck::Count);

    // margins[s][c]
    std::vector<std::array<double, kChecks>> margins(samples);
    parallel_for(samples, threads, [&](std::size_t s) {
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (s + 1)));
        std::uniform_real_distribution<double> uni(-3.0, 3.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::bernoulli_distribution sparse(0.15);
        const double scale_z = std::exp(uni(rng));
        const double scale_x = std::exp(uni(rng));
        std::vector<double> z(n);
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = sparse(rng) ? 0.0 : scale_z * gauss(rng);
            x[i] = sparse(rng) ? 0.0 : scale_x * gauss(rng);
        }
        std::vector<double> xz(n);
        for (std::size_t i = 0; i < n; ++i) xz[i] = x[i] * z[i];
        const double exz = expectation(market, xz);
        const double lz = luxemburg_norm(mod_i, z);
        const double az = amemiya_norm(mod_i, z);
        const double lx = luxemburg_norm(mod_j, x);
        const double ax = amemiya_norm(mod_j, x);
        const double iz = mod_i(z);
        const double jx = mod_j(x);

        const auto margin = [](double lhs, double rhs) {
            return (rhs - lhs) / std::max(1.0, std::abs(rhs));
        };
        auto& m = margins[s];
        m[static_cast<std::size_t>(BatteryCheck::HolderAmemiyaLuxemburg)] =
            margin(std::abs(exz), az * lx);
        m[static_cast<std::size_t>(BatteryCheck::HolderLuxemburgAmemiya)] =
            margin(std::abs(exz), lz * ax);
        m[static_cast<std::size_t>(BatteryCheck::HolderLuxemburg)] =
            margin(std::abs(exz), 2.0 * lz * lx);
        m[static_cast<std::size_t>(BatteryCheck::Young)] = margin(exz, iz + jx);
        m[static_cast<std::size_t>(BatteryCheck::NormOrderI)] =
            std::min(margin(lz, az), margin(az, 2.0 * lz));
        m[static_cast<std::size_t>(BatteryCheck::NormOrderJ)] =
            std::min(margin(lx, ax), margin(ax, 2.0 * lx));
    });

    BatteryReport report;
    report.samples = samples;
    report.violations.assign(kChecks, 0);
    report.worst_margin.assign(kChecks, kInf);
    for (const auto& m : margins) {
        for (std::size_t c = 0; c < kChecks; ++c) {
            report.worst_margin[c] = std::min(report.worst_margin[c], m[c]);
            if (m[c] < -report.slack) ++report.violations[c];
        }
    }
    return report;
}

}  // namespace robustutil

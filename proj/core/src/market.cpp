#include "robustutil/market.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "robustutil/errors.hpp"
#include "robustutil/lp.hpp"
#include "robustutil/numeric.hpp"

namespace robustutil {

FiniteMarket::FiniteMarket(std::vector<double> probs, ObservableMap observables, PriceMap prices,
                           double min_probability)
    : probs_(std::move(probs)), observables_(std::move(observables)), prices_(std::move(prices)) {
    if (probs_.empty()) throw ValidationError("market needs at least one state");
    KahanSum total;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double p = probs_[i];
        if (!std::isfinite(p) || !(p > 0.0) || p < min_probability) {
            std::ostringstream os;
            os << "probs[" << i << "] = " << p << " must be positive and >= " << min_probability;
            throw ValidationError(os.str());
        }
        total.add(p);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "probs must sum to 1 (sum = " << total.value() << ")";
        throw ValidationError(os.str());
    }
    for (const auto& [id, values] : observables_) {
        if (values.size() != probs_.size()) {
            throw ValidationError("observable '" + id + "' has " + std::to_string(values.size()) +
                                  " values, expected " + std::to_string(probs_.size()));
        }
        for (const double v : values) {
            if (!std::isfinite(v)) {
                throw ValidationError("observable '" + id + "' has a non-finite value");
            }
        }
    }
    for (const auto& [id, price] : prices_) {
        const auto it = observables_.find(id);
        if (it == observables_.end()) {
            throw ValidationError("price observable '" + id + "' is not a declared observable");
        }
        const double mean = kahan_dot(probs_, it->second);
        if (std::abs(mean - price.initial_value) > price.tolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "price observable '" << id << "' violates the martingale property: E = " << mean
               << ", initial value = " << price.initial_value << ", tolerance = " << price.tolerance;
            throw ValidationError(os.str());
        }
    }
}

bool FiniteMarket::has_observable(std::string_view id) const {
    return observables_.find(id) != observables_.end();
}

std::span<const double> FiniteMarket::observable(std::string_view id) const {
    const auto it = observables_.find(id);
    if (it == observables_.end()) {
        throw ValidationError("unknown observable '" + std::string(id) + "'");
    }
    return it->second;
}

void ConstraintSet::validate(const FiniteMarket& market) const {
    std::size_t eq_count = 0;
    for (const auto& c : items) {
        if (!market.has_observable(c.observable)) {
            throw ValidationError("constraint references undeclared observable '" + c.observable +
                                  "'");
        }
        if (!std::isfinite(c.bound)) {
            throw ValidationError("constraint on '" + c.observable + "' has a non-finite bound");
        }
        if (c.kind == ConstraintKind::EQ) ++eq_count;
    }
    if (eq_count + 1 > market.size()) {
        throw ValidationError("at most n-1 EQ constraints are allowed");
    }
}

ResolvedConstraints resolve_constraints(const FiniteMarket& market,
                                        const ConstraintSet& constraints) {
    constraints.validate(market);
    ResolvedConstraints r;
    for (const auto& c : constraints.items) {
        const auto h = market.observable(c.observable);
        r.rows.emplace_back(h.begin(), h.end());
        r.bounds.push_back(c.bound);
        r.kinds.push_back(c.kind);
    }
    return r;
}

void LognormalSpec::validate() const {
    if (!(sigma > 0.0)) throw ValidationError("lognormal generator: sigma must be > 0");
    if (!(T > 0.0)) throw ValidationError("lognormal generator: T must be > 0");
    if (!(s0 > 0.0)) throw ValidationError("lognormal generator: s0 must be > 0");
    if (nodes < 2 || nodes > 400) {
        throw ValidationError("lognormal generator: nodes must lie in [2, 400]");
    }
}

GaussHermiteRule gauss_hermite_rule(int n) {
    if (n < 1 || n > 400) throw DomainError("gauss_hermite_rule: n must lie in [1, 400]");
    // Roots of H_n from the symmetric Jacobi matrix (weight exp(-x^2)), then
    // Newton-polished on the orthonormal recurrence, which also yields the
    // weights without losing the tiny tail values.
    const auto un = static_cast<std::size_t>(n);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 1));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
    std::vector<double> roots(un, 0.0);
    if (n > 1) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
        eig.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::EigenvaluesOnly);
        for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    }

    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    const auto nd = static_cast<double>(n);
    std::vector<double> w(un);
    for (std::size_t i = 0; i < un; ++i) {
        double z = roots[i];
        double pp = 0.0;
        for (int it = 0; it < 20; ++it) {
            double p1 = pim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const auto jd = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * nd) * p2;
            const double step = p1 / pp;
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        roots[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    // Exact symmetry.
    for (std::size_t i = 0; i < un / 2; ++i) {
        const std::size_t j = un - 1 - i;
        const double r = 0.5 * (roots[j] - roots[i]);
        const double wi = 0.5 * (w[i] + w[j]);
        roots[i] = -r;
        roots[j] = r;
        w[i] = w[j] = wi;
    }
    if (n % 2 == 1) roots[un / 2] = 0.0;

    GaussHermiteRule rule;
    rule.nodes.resize(un);
    rule.weights.resize(un);
    KahanSum total;
    for (const double wi : w) total.add(wi);
    for (std::size_t i = 0; i < un; ++i) {
        rule.nodes[i] = std::numbers::sqrt2 * roots[i];
        rule.weights[i] = w[i] / total.value();
    }
    return rule;
}

FiniteMarket gauss_hermite_market(const LognormalSpec& spec) {
    spec.validate();
    const auto rule = gauss_hermite_rule(spec.nodes);
    const double drift = -0.5 * spec.sigma * spec.sigma * spec.T;
    const double vol = spec.sigma * std::sqrt(spec.T);
    std::vector<double> s(rule.nodes.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = spec.s0 * std::exp(drift + vol * rule.nodes[i]);
    }
    for (const double wi : rule.weights) {
        if (!(wi > 0.0)) throw ValidationError("quadrature weight underflow; reduce nodes");
    }
    const double mean = kahan_dot(rule.weights, s);
    const double tol = std::max(1e-10 * spec.s0, 2.0 * std::abs(mean - spec.s0));
    FiniteMarket::ObservableMap obs;
    obs.emplace("S_T", std::move(s));
    FiniteMarket::PriceMap prices;
    prices.emplace("S_T", PriceObservable{spec.s0, tol});
    return FiniteMarket(rule.weights, std::move(obs), std::move(prices), 0.0);
}

double expectation(const FiniteMarket& market, std::span<const double> values) {
    if (values.size() != market.size()) {
        throw ValidationError("expectation: length mismatch (" + std::to_string(values.size()) +
                              " vs " + std::to_string(market.size()) + ")");
    }
    const auto p = market.probs();
    KahanSum acc;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw ValidationError("expectation: non-finite value");
        acc.add(p[i] * values[i]);
    }
    return acc.value();
}

FeasibilityReport feasibility_check(const FiniteMarket& market, const ConstraintSet& constraints,
                                    bool strict) {
    const auto rc = resolve_constraints(market, constraints);
    const std::size_t n = market.size();
    const std::size_t m = rc.size();
    const auto p = market.probs();

    std::size_t ge_count = 0;
    for (const auto k : rc.kinds) ge_count += k == ConstraintKind::GE ? 1 : 0;

    // Variables: masses q_i = p_i Z'_i, t, one surplus per GE row. Z = Z' + t.
    // Working with masses keeps the tableau well scaled when some p_i are tiny.
    const std::size_t t_col = n;
    const std::size_t cols = n + 1 + ge_count;
    lp::StandardForm lp;
    lp.c.assign(cols, 0.0);
    lp.c[t_col] = -1.0;

    std::vector<double> norm_row(cols, 0.0);
    for (std::size_t i = 0; i < n; ++i) norm_row[i] = 1.0;
    norm_row[t_col] = 1.0;
    lp.A.push_back(std::move(norm_row));
    lp.b.push_back(1.0);

    std::size_t surplus = n + 1;
    for (std::size_t l = 0; l < m; ++l) {
        std::vector<double> row(cols, 0.0);
        const auto& h = rc.rows[l];
        for (std::size_t i = 0; i < n; ++i) row[i] = h[i];
        const double mean_h = kahan_dot(p, h);
        if (rc.kinds[l] == ConstraintKind::GE) {
            row[t_col] = mean_h - (1.0 + std::abs(rc.bounds[l]));
            row[surplus++] = -1.0;
        } else {
            row[t_col] = mean_h;
        }
        lp.A.push_back(std::move(row));
        lp.b.push_back(rc.bounds[l]);
    }

    FeasibilityReport report;
    const auto result = lp::solve(lp);
    if (result.status != lp::Status::Optimal) return report;

    const double t = result.x[t_col];
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = result.x[i] / p[i] + t;
    report.feasible = true;
    report.interior_margin = t;
    if (strict) report.strictly_feasible = t >= kStrictSlack;
    report.witness = std::move(z);
    return report;
}

}  // namespace robustutil

#include "robustutil/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robustutil/errors.hpp"

namespace robustutil {

std::vector<double> logspace(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) {
        throw DomainError("logspace: need 0 < lo <= hi and count >= 1");
    }
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = std::exp(a + t * (b - a));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

GoldenSectionResult golden_section_minimize(const std::function<double(double)>& f, double lo,
                                            double hi, double abs_tol, int max_iter) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    GoldenSectionResult r;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    r.evaluations = 2;
    for (int it = 0; it < max_iter && (b - a) > abs_tol; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++r.evaluations;
    }
    r.lo = a;
    r.hi = b;
    if (fc <= fd) {
        r.x = c;
        r.fx = fc;
    } else {
        r.x = d;
        r.fx = fd;
    }
    return r;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) theta = candidate;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - theta);
    return out;
}

double kahan_dot(std::span<const double> a, std::span<const double> b) {
    KahanSum acc;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

}  // namespace robustutil

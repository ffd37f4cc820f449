#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace robustutil {

/// Extended-real +infinity. Operations that leave their effective domain
/// return this value instead of a large finite float.
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_pos_inf(double v) { return v == kInf; }
inline bool is_neg_inf(double v) { return v == -kInf; }

/// Compensated (Kahan) accumulator. Summation order is the call order.
class KahanSum {
public:
    void add(double v) {
        if (std::isinf(v)) {
            inf_ += v;
            return;
        }
        const double y = v - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return inf_ != 0.0 || std::isnan(inf_) ? inf_ : sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
    double inf_ = 0.0;
};

/// `count` points geometrically spaced in [lo, hi]; both ends included.
std::vector<double> logspace(double lo, double hi, std::size_t count);

struct GoldenSectionResult {
    double x = 0.0;
    double fx = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int evaluations = 0;
};

/// Golden-section minimization of a unimodal function on [lo, hi].
/// Stops when hi - lo <= abs_tol or after max_iter reductions.
GoldenSectionResult golden_section_minimize(const std::function<double(double)>& f, double lo,
                                            double hi, double abs_tol, int max_iter = 400);

/// Euclidean projection onto the probability simplex {w >= 0, sum w = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

/// Weighted dot product sum_i a_i * b_i with compensated summation.
double kahan_dot(std::span<const double> a, std::span<const double> b);

}  // namespace robustutil

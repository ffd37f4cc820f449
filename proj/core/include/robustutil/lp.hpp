#pragma once

#include <cstddef>
#include <vector>

namespace robustutil::lp {

/// min c'x  s.t.  A x = b, x >= 0   (A dense, row-major).
struct StandardForm {
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    std::vector<double> c;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

struct Result {
    Status status = Status::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    int pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
Result solve(const StandardForm& problem, int max_pivots = 100000);

}  // namespace robustutil::lp

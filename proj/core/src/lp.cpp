#include "robustutil/lp.hpp"

#include <algorithm>
#include <cmath>

#include "robustutil/errors.hpp"

namespace robustutil::lp {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-12;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

    double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double rhs(std::size_t r) const { return at(r, cols_); }
    // Row `rows_` holds reduced costs; its rhs is minus the objective.
    double& cost(std::size_t c) { return at(rows_, c); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t pr, std::size_t pc) {
        const double inv = 1.0 / at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
        basis_[pr] = pc;
    }

    void load_costs(const std::vector<double>& costs) {
        for (std::size_t c = 0; c <= cols_; ++c) at(rows_, c) = c < cols_ ? costs[c] : 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            const double cb = costs[basis_[r]];
            if (cb == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(rows_, c) -= cb * at(r, c);
        }
    }

    // Bland's rule over columns [0, allowed). Returns Optimal, Unbounded or
    // IterationLimit.
    Status run(std::size_t allowed, int& pivots, int max_pivots) {
        while (true) {
            std::size_t enter = allowed;
            for (std::size_t c = 0; c < allowed; ++c) {
                if (at(rows_, c) < -kCostTol) {
                    enter = c;
                    break;
                }
            }
            if (enter == allowed) return Status::Optimal;
            std::size_t leave = rows_;
            double best = 0.0;
            for (std::size_t r = 0; r < rows_; ++r) {
                const double a = at(r, enter);
                if (a <= kPivotTol) continue;
                const double ratio = rhs(r) / a;
                if (leave == rows_ || ratio < best - 1e-14 ||
                    (ratio <= best + 1e-14 && basis_[r] < basis_[leave])) {
                    leave = r;
                    best = ratio;
                }
            }
            if (leave == rows_) return Status::Unbounded;
            pivot(leave, enter);
            if (++pivots > max_pivots) return Status::IterationLimit;
        }
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
    std::vector<std::size_t> basis_;
};

}  // namespace

Result solve(const StandardForm& problem, int max_pivots) {
    const std::size_t m = problem.A.size();
    const std::size_t n = problem.c.size();
    if (problem.b.size() != m) throw DomainError("lp::solve: b has wrong length");
    for (const auto& row : problem.A) {
        if (row.size() != n) throw DomainError("lp::solve: ragged constraint matrix");
    }

    // Columns: n structural, then m artificial.
    Tableau t(m, n + m);
    double b_scale = 1.0;
    for (std::size_t r = 0; r < m; ++r) {
        const double sign = problem.b[r] < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < n; ++c) t.at(r, c) = sign * problem.A[r][c];
        t.at(r, n + r) = 1.0;
        t.rhs(r) = sign * problem.b[r];
        b_scale = std::max(b_scale, std::abs(problem.b[r]));
        t.basis()[r] = n + r;
    }

    Result result;
    std::vector<double> phase1(n + m, 0.0);
    std::fill(phase1.begin() + static_cast<std::ptrdiff_t>(n), phase1.end(), 1.0);
    t.load_costs(phase1);
    Status st = t.run(n + m, result.pivots, max_pivots);
    if (st == Status::IterationLimit) {
        result.status = st;
        return result;
    }
    const double infeasibility = -t.at(m, n + m);
    if (infeasibility > 1e-9 * b_scale) {
        result.status = Status::Infeasible;
        return result;
    }

    // Drive remaining artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
        if (t.basis()[r] < n) continue;
        std::size_t best = n;
        double best_abs = kPivotTol;
        for (std::size_t c = 0; c < n; ++c) {
            if (std::abs(t.at(r, c)) > best_abs) {
                best_abs = std::abs(t.at(r, c));
                best = c;
            }
        }
        if (best < n) t.pivot(r, best);
    }

    std::vector<double> phase2(n + m, 0.0);
    std::copy(problem.c.begin(), problem.c.end(), phase2.begin());
    t.load_costs(phase2);
    st = t.run(n, result.pivots, max_pivots);
    result.status = st;
    if (st != Status::Optimal) return result;

    result.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (t.basis()[r] < n) result.x[t.basis()[r]] = std::max(0.0, t.rhs(r));
    }
    double obj = 0.0;
    for (std::size_t c = 0; c < n; ++c) obj += problem.c[c] * result.x[c];
    result.objective = obj;
    return result;
}

}  // namespace robustutil::lp

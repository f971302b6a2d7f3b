// SPDX-License-Identifier: MIT
#include "riskstop/simplex.hpp"

#include <cmath>
#include <vector>

#include "riskstop/errors.hpp"

namespace riskstop {

namespace {

constexpr double kTol = 1e-9;

// One simplex phase on a tableau T whose column rhs_col holds the rhs,
// with cost row z. Entering candidates are columns [0, n_candidates);
// basis[i] is the column basic in row i. Returns true on optimality,
// false on unboundedness.
bool run_phase(Eigen::MatrixXd& T, Eigen::RowVectorXd& z, std::vector<int>& basis,
               int n_candidates, int rhs_col, int& iter_budget) {
    const int m = static_cast<int>(T.rows());
    while (iter_budget-- > 0) {
        // Bland: entering column = lowest index with negative reduced cost.
        int enter = -1;
        for (int j = 0; j < n_candidates; ++j) {
            if (z(j) < -kTol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return true;

        int leave = -1;
        double best_ratio = 0.0;
        for (int i = 0; i < m; ++i) {
            const double a = T(i, enter);
            if (a > kTol) {
                const double ratio = T(i, rhs_col) / a;
                // Bland tie-break: smallest basis index among minimal ratios.
                if (leave < 0 || ratio < best_ratio - kTol) {
                    leave = i;
                    best_ratio = ratio;
                } else if (ratio < best_ratio + kTol && basis[i] < basis[leave]) {
                    leave = i;
                    best_ratio = std::min(best_ratio, ratio);
                }
            }
        }
        if (leave < 0) return false;  // unbounded direction

        const double piv = T(leave, enter);
        T.row(leave) /= piv;
        for (int i = 0; i < m; ++i) {
            if (i == leave) continue;
            const double f = T(i, enter);
            if (f != 0.0) T.row(i) -= f * T.row(leave);
        }
        const double zf = z(enter);
        if (zf != 0.0) z -= zf * T.row(leave);
        basis[leave] = enter;
    }
    throw NumericError("simplex: iteration limit reached");
}

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c, int max_iter) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    if (b.size() != m || c.size() != n)
        throw ValidationError("solve_lp: inconsistent dimensions");

    // Tableau over original variables plus one artificial per row.
    Eigen::MatrixXd T(m, n + m + 1);
    T.setZero();
    T.block(0, 0, m, n) = A;
    T.col(n + m) = b;
    for (int i = 0; i < m; ++i) {
        if (T(i, n + m) < 0.0) T.row(i) = -T.row(i);
        T(i, n + i) = 1.0;
    }
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    // Phase 1: minimize the sum of artificials.
    Eigen::RowVectorXd z1 = Eigen::RowVectorXd::Zero(n + m + 1);
    for (int i = 0; i < m; ++i) z1 -= T.row(i);  // reduced costs of sum(artificials)
    for (int i = 0; i < m; ++i) z1(n + i) = 0.0;
    int budget = max_iter;
    if (!run_phase(T, z1, basis, n + m, n + m, budget))
        throw NumericError("simplex: phase 1 unbounded (should be impossible)");
    if (-z1(n + m) > 1e-7) return {LpStatus::Infeasible, {}, 0.0};

    // Drive leftover artificials out of the basis; a row with no original
    // pivot is redundant and can be neutralized in place.
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        int pivot_col = -1;
        for (int j = 0; j < n; ++j) {
            if (std::abs(T(i, j)) > 1e-8) {
                pivot_col = j;
                break;
            }
        }
        if (pivot_col < 0) {
            T.row(i).setZero();
            continue;
        }
        const double piv = T(i, pivot_col);
        T.row(i) /= piv;
        for (int k = 0; k < m; ++k) {
            if (k == i) continue;
            const double f = T(k, pivot_col);
            if (f != 0.0) T.row(k) -= f * T.row(i);
        }
        basis[i] = pivot_col;
    }

    // Phase 2 on the original costs; artificial columns are frozen out.
    Eigen::RowVectorXd z2 = Eigen::RowVectorXd::Zero(n + m + 1);
    z2.head(n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n && z2(basis[i]) != 0.0) {
            z2 -= z2(basis[i]) * T.row(i);
        }
    }
    for (int i = 0; i < m; ++i) z2(n + i) = 1e30;  // never re-enter
    if (!run_phase(T, z2, basis, n, n + m, budget))
        return {LpStatus::Unbounded, {}, 0.0};

    LpResult res;
    res.status = LpStatus::Optimal;
    res.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.x(basis[i]) = T(i, n + m);
    res.objective = c.dot(res.x);
    return res;
}

}  // namespace riskstop

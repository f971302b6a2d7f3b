// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Core>

namespace riskstop {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
    LpStatus status = LpStatus::IterationLimit;
    Eigen::VectorXd x;       // primal solution, valid when Optimal
    double objective = 0.0;  // c'x at the solution
};

/// Solves min c'x subject to A x = b, x >= 0 with a dense two-phase
/// tableau simplex using Bland's rule (no cycling). Built for the small
/// equality systems of the minimax checks (tens of rows), not for scale.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c, int max_iter = 20000);

}  // namespace riskstop

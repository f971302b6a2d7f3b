// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "riskstop/divergence.hpp"
#include "riskstop/lsm.hpp"
#include "riskstop/market.hpp"

namespace riskstop {

/// Nested-simulation settings for the dual martingale.
struct DualConfig {
    int n_outer = 10000;  // outer trajectories carrying the supremum
    int n_inner = 1000;   // sub-paths per (outer path, date)
    std::uint64_t seed = 1;

    void validate() const;
};

/// Approximate Doob-Meyer martingale along one outer path: M_0 = 0 and
/// M_{j+1} - M_j = Vhat_{j+1} - inner_j, where inner_j averages n_inner
/// fresh sub-paths branched from the outer state at date j, each realized
/// at the policy's first stop from date j+1 on, and Vhat_{j+1} is the
/// policy value seen at date j+1 (the immediate reward Z_{j+1} when the
/// policy stops there, otherwise inner_{j+1}). Every increment has
/// conditional mean zero at any n_inner, so the supremum estimator below
/// stays upper-biased even with rough inner estimates. Sub-paths draw
/// from the substream (seed, Inner, path, date), making results
/// independent of evaluation order and thread count. Returns M_0..M_J.
std::vector<double> build_martingale_increments(
    const RegressionPolicy& policy, const PathModel& model, const PathSet& outer,
    int path, const PayoffSpec& payoff, const DivergenceSpec& spec, double x,
    const DualConfig& cfg);

/// Mean over outer paths of sup_j (Z_j - M_j); upper-biased for the
/// robust value at the same fixed x. The standard error comes from the
/// per-path supremum sample.
BoundEstimate upper_bound(const RegressionPolicy& policy, const PathModel& model,
                          const PathSet& outer, const PayoffSpec& payoff,
                          const DivergenceSpec& spec, double x,
                          const DualConfig& cfg);

/// Same averaging with the shifted rewards and martingale supplied as
/// matrices (rows are paths, columns dates). Exists so exact or
/// degenerate martingales (a lattice Doob-Meyer part, or M = 0) feed
/// through the identical estimator.
BoundEstimate upper_bound_given_martingale(const Eigen::MatrixXd& z_rows,
                                           const Eigen::MatrixXd& m_rows,
                                           double x);

/// Minimum of upper_bound over one policy per shift, each evaluated at
/// the x it was fitted for. The outer sample uses the FinalEval stream:
/// independent of the training and selection streams, shared with the
/// primal's final evaluation so the two bounds are positively correlated.
BoundEstimate dual_value(const PathModel& model, const PayoffSpec& payoff,
                         const DivergenceSpec& spec,
                         std::span<const RegressionPolicy> policies,
                         const DualConfig& cfg);

}  // namespace riskstop

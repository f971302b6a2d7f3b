// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskstop/divergence.hpp"
#include "riskstop/errors.hpp"
#include "riskstop/market.hpp"

namespace riskstop {

/// Node of a finite scenario tree. Parents precede children in the node
/// array; node 0 is the root. `state` carries the underlying price for
/// trees built from a market model and is 0 otherwise.
struct LatticeNode {
    double payoff = 0.0;  // Y at the node, discounted units, >= 0
    double state = 0.0;
    int level = 0;
    int parent = -1;
    std::vector<int> children;
    std::vector<double> probs;  // strictly positive, sum to 1
};

/// Explicit scenario tree used as an exact oracle: every conditional
/// expectation is a finite sum, so Snell envelopes, dual martingales and
/// stopping-time enumerations are computable to machine precision.
/// All leaves sit at the final level.
struct Lattice {
    std::vector<LatticeNode> nodes;
    std::vector<double> dates;  // per level; dates[0] is the root time

    int depth() const { return static_cast<int>(dates.size()) - 1; }
    bool is_leaf(int n) const { return nodes[n].children.empty(); }

    void validate() const;

    std::vector<double> payoffs() const;

    /// Non-recombining binomial tree moment-matched to one-asset GBM per
    /// grid interval: u = e^{sigma sqrt(dt)}, d = 1/u and the drift-matched
    /// up-probability q = (e^{(r-delta) dt} - d) / (u - d). Requires d == 1,
    /// sigma > 0, an equidistant grid, and q in (0,1).
    static Lattice binomial(const GbmParams& params, const ExerciseGrid& grid,
                            const PayoffSpec& payoff);
};

/// Fixture I/O. The JSON schema is
///   { "dates": [...], "nodes": [ {"payoff": .., "state": ..,
///     "children": [..], "probs": [..]}, ... ] }
/// with children given as node indices. Parse errors name the node.
Lattice lattice_from_json(const nlohmann::json& doc);
nlohmann::json lattice_to_json(const Lattice& lat);

/// Random full-depth tree for oracle sweeps: up to max_periods levels,
/// 1..max_branch children per node, payoffs in [0, 10]. Trees whose
/// adapted-rule count would exceed rule_cap are resampled.
Lattice random_tree(std::uint64_t seed, int max_periods = 4, int max_branch = 3,
                    std::uint64_t rule_cap = 1u << 20);

/// P(reach node), one entry per node.
std::vector<double> reach_probabilities(const Lattice& lat);

/// Number of adapted stopping rules, saturated at 2^63 on overflow.
std::uint64_t rule_count(const Lattice& lat);

/// Calls fn(path_nodes, probability) for every root-to-leaf path.
void for_each_leaf_path(
    const Lattice& lat,
    const std::function<void(const std::vector<int>&, double)>& fn);

// ---------------------------------------------------------------------------
// Snell envelope and its Doob-Meyer split

/// Per-node Snell value V plus the cumulative martingale part M (zero
/// conditional increments, M = 0 at the root) and nondecreasing
/// compensator A, satisfying V = v0 + M - A node-wise.
struct SnellResult {
    double v0 = 0.0;
    std::vector<double> value;
    std::vector<double> continuation;  // E[V(child)] per node; = value on leaves
    std::vector<double> martingale;    // cumulative M along the unique path
    std::vector<double> compensator;   // cumulative A along the unique path
};

/// Backward induction V(leaf) = z(leaf), V = max(z, E[V(children)]).
SnellResult snell_envelope(const Lattice& lat, std::span<const double> z);

/// First-stop rule of the Snell solution: stop where z >= continuation
/// (ties stop, so the earliest date wins). One flag per node.
std::vector<char> snell_stopping_rule(const Lattice& lat, std::span<const double> z,
                                      const SnellResult& snell);

/// Exhaustive maximum of E[z_tau] over adapted stopping rules, built by
/// cartesian products of per-node rule values; deliberately shares no
/// recursion with snell_envelope so the pair works as an oracle.
/// Throws NumericError when rule_count exceeds cap.
struct EnumerationResult {
    double value = 0.0;
    std::vector<char> rule;  // first-stop flags of a maximizing rule
};
EnumerationResult enumerate_stopping_times(const Lattice& lat,
                                           std::span<const double> z,
                                           std::uint64_t cap = 1u << 20);

/// Evaluates E[z_tau] for a first-stop rule.
double rule_value(const Lattice& lat, std::span<const double> z,
                  std::span<const char> stop);

/// Visits every adapted first-stop rule (cap-guarded).
void for_each_rule(const Lattice& lat, std::uint64_t cap,
                   const std::function<void(const std::vector<char>&)>& fn);

/// Checks the pathwise dual identity: with the exact Doob-Meyer
/// martingale M, sup_j (z_j - M_j) equals v0 on every path.
struct PathwiseDualReport {
    double v0 = 0.0;
    double sup_mean = 0.0;       // probability-weighted mean of path suprema
    double max_deviation = 0.0;  // max over paths of |sup - v0|
    double sup_variance = 0.0;   // probability-weighted variance of suprema
};
PathwiseDualReport pathwise_dual_check(const Lattice& lat,
                                       std::span<const double> z);

// ---------------------------------------------------------------------------
// Robust values on the tree

/// inf over the shift x of the Snell value of phi_star(x + y) - x; exact
/// DP inside a 1-D convex search. AVaR requires alpha < 1 here (alpha = 1
/// has a flat objective; use RiskNeutral).
struct RobustLatticeResult {
    double value = 0.0;
    double x_star = 0.0;
};
RobustLatticeResult robust_value_lattice(const Lattice& lat,
                                         std::span<const double> y,
                                         const DivergenceSpec& spec,
                                         const ShiftSearchConfig& cfg = {});

/// Same DP with exercise restricted to masked levels (leaves are always
/// exercisable: stopping is capped at the horizon).
double snell_value_masked(const Lattice& lat, std::span<const double> z,
                          std::span<const char> level_mask);
RobustLatticeResult robust_value_masked(const Lattice& lat,
                                        std::span<const double> y,
                                        const DivergenceSpec& spec,
                                        std::span<const char> level_mask,
                                        const ShiftSearchConfig& cfg = {});

// ---------------------------------------------------------------------------
// Randomized stopping kernels

/// Adapted stopping mass: w(node) is the probability of stopping at the
/// node given its history; masses along every root-to-leaf path sum to 1.
/// Deterministic rules are the 0/1 vertices of this polytope.
struct RandomizedKernel {
    std::vector<double> mass;

    void validate(const Lattice& lat) const;
};

RandomizedKernel kernel_from_rule(const Lattice& lat, std::span<const char> stop);
RandomizedKernel mix_kernels(const RandomizedKernel& a, const RandomizedKernel& b,
                             double lambda);

/// Finite distribution, sorted support with exact-duplicate merging.
struct EmpiricalDistribution {
    std::vector<double> points;
    std::vector<double> probs;

    void validate() const;
    static EmpiricalDistribution from_weighted(
        std::vector<std::pair<double, double>> point_weight);
};

/// Law of the payoff sampled at the randomized time: the node payoff
/// weighted by P(reach node) * w(node).
EmpiricalDistribution kernel_distribution(const Lattice& lat,
                                          std::span<const double> y,
                                          const RandomizedKernel& kernel);

/// E[phi_star(x + Y)] - x under the distribution, the direct route.
double expectation_objective(const EmpiricalDistribution& dist,
                             const DivergenceSpec& spec, double x);

/// Same value through the tail representation
///   integral_0^inf phi_star'(x + z) P(Y > z) dz + phi_star(x) - x,
/// integrated exactly between support points: the survival function is
/// piecewise constant and phi_star is its own antiderivative of
/// phi_star', so each piece is a closed-form difference. Requires
/// nonnegative support.
double tail_integral_objective(const EmpiricalDistribution& dist,
                               const DivergenceSpec& spec, double x);

/// inf_x of expectation_objective for a fixed distribution.
OceResult distribution_oce(const EmpiricalDistribution& dist,
                           const DivergenceSpec& spec,
                           const ShiftSearchConfig& cfg = {});

/// Bilinear pairing sum_node P(reach) w(node) phi_star(x + y(node)) - x,
/// the objective of the minimax problem; affine in the kernel, convex in x.
double kernel_objective(const Lattice& lat, std::span<const double> y,
                        const RandomizedKernel& kernel, const DivergenceSpec& spec,
                        double x);

// ---------------------------------------------------------------------------
// Minimax and saddle verification

/// Three views of the same game on [x_grid.front(), x_grid.back()]:
///   inf_sup:           1-D search over x of the exact Snell value,
///   sup_inf_randomized: cutting-plane maximization over the kernel
///                       polytope of the concave map w -> inf_x h(w, x),
///   sup_inf_deterministic: brute force over all adapted rules.
/// The first two must agree (equality holds at finite scale); the third
/// may be strictly smaller on atomful trees and is only reported.
/// Throws NumericError if |inf_sup - sup_inf_randomized| > assert_tol,
/// or when enumeration exceeds cap.
struct MinimaxReport {
    double inf_sup = 0.0;
    double x_at_inf_sup = 0.0;
    double sup_inf_randomized = 0.0;
    RandomizedKernel kernel;  // maximizing kernel
    double sup_inf_deterministic = 0.0;
    std::vector<char> best_rule;
    int cuts = 0;
};
MinimaxReport minimax_check(const Lattice& lat, std::span<const double> y,
                            const DivergenceSpec& spec,
                            std::span<const double> x_grid,
                            const ShiftSearchConfig& cfg = {},
                            double assert_tol = 1e-6,
                            std::uint64_t cap = 1u << 20);

/// Numeric saddle point: x* from the convex search, kernel* from the
/// cutting plane. Verifies h(rule, x*) <= h(w*, x*) <= h(w*, x) over all
/// enumerated pure rules and all grid x; throws NumericError with the
/// violation when either inequality fails by more than tolerance.
struct SaddleResult {
    double x_star = 0.0;
    RandomizedKernel kernel;
    double value = 0.0;
    double left_violation = 0.0;   // max over rules of h(rule,x*) - h(w*,x*)
    double right_violation = 0.0;  // max over grid of h(w*,x*) - h(w*,x)
};
SaddleResult find_saddle(const Lattice& lat, std::span<const double> y,
                         const DivergenceSpec& spec,
                         std::span<const double> x_grid,
                         const ShiftSearchConfig& cfg = {},
                         double tolerance = 1e-8,
                         std::uint64_t cap = 1u << 20);

// ---------------------------------------------------------------------------
// Dyadic time coarsening

/// Exercise mask at dyadic level j: a date t > 0 is allowed when t 2^j is
/// an integer (stopping at time 0 is never allowed on the coarse grid);
/// the final date is always allowed because stopping is capped there.
std::vector<char> dyadic_exercise_mask(const Lattice& lat, int level);

/// Rounds a first-stop rule up to the coarse structure: each stop moves
/// forward to the first masked level at or after it (or the leaf).
std::vector<char> coarsen_stopping_rule(const Lattice& lat,
                                        std::span<const char> stop, int level);

// ---------------------------------------------------------------------------
// d = 1 binomial market model (the cross-check counterpart of GbmModel)

class BinomialModel final : public PathModel {
public:
    BinomialModel(GbmParams params, ExerciseGrid grid);

    int assets() const override { return 1; }
    const ExerciseGrid& grid() const override { return grid_; }
    const GbmParams& params() const override { return params_; }
    void initial_state(std::span<double> out) const override;
    void step(std::span<double> state, int from_date,
              SubstreamRng& rng) const override;

    double up() const { return u_; }
    double down() const { return d_; }
    double up_probability() const { return q_; }

private:
    GbmParams params_;
    ExerciseGrid grid_;
    double u_ = 1.0, d_ = 1.0, q_ = 0.5;
};

}  // namespace riskstop

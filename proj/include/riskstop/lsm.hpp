// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "riskstop/divergence.hpp"
#include "riskstop/market.hpp"

namespace riskstop {

/// Regression features of a per-date state. The default family evaluates
/// every price monomial of total degree <= max_degree on the price vector
/// sorted in descending order, then appends the current exercise value y
/// of the problem being fitted and y^2. Sorting makes the features
/// symmetric under asset permutation, which a max-payoff is; the family
/// gives 12 functions for two assets at degree 3 and 6 functions for one
/// asset. Feeding the exercise value (rather than the untransformed
/// payoff) lets the feature scale track the risk transform, which matters
/// a great deal for exponential-shaped rewards.
class BasisSpec {
public:
    BasisSpec() = default;

    static BasisSpec sorted_monomials(int assets, int max_degree = 3);

    int size() const { return static_cast<int>(exponents_.size()) + 2; }
    int assets() const { return assets_; }
    int degree() const { return degree_; }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& family() const { return family_; }

    /// Features of one state into out (size() entries). prices need not
    /// be sorted; y is the current exercise value of the fitted problem.
    void evaluate(std::span<const double> prices, double y,
                  std::span<double> out) const;

private:
    int assets_ = 0;
    int degree_ = 0;
    std::string family_;
    std::vector<std::vector<int>> exponents_;  // price monomials, one row each
    std::vector<std::string> names_;
};

/// Exercise rule defined by fitted continuation values for the shifted
/// reward Z_j = phi_star(x + Y_j) - x: stop at the first date whose Z
/// reaches the fitted continuation. Dates 1..J-1 carry regression
/// coefficients; date 0 has a single scalar estimate because the state
/// there is deterministic; date J always stops.
struct RegressionPolicy {
    double shift = 0.0;  // the x the policy was fitted for
    int steps = 0;       // J; exercise dates are 0..J
    BasisSpec basis;
    std::vector<Eigen::VectorXd> coeffs;  // index j-1 holds date j, j = 1..J-1
    double root_continuation = 0.0;
    std::vector<int> ridge_dates;  // dates where the ridge fallback fired

    /// First-stop predicate at date j given the raw prices, discounted
    /// payoff y and shifted reward z there.
    bool stops_at(int date, std::span<const double> prices, double y,
                  double z) const;

    void validate() const;

    nlohmann::json to_json() const;
    static RegressionPolicy from_json(const nlohmann::json& doc);
};

enum class BoundKind { Lower, Upper };

/// Monte Carlo point estimate with its standard error.
struct BoundEstimate {
    double value = 0.0;
    double std_error = 0.0;  // sample standard deviation / sqrt(n)
    long n = 0;
    double x_star = 0.0;
    BoundKind kind = BoundKind::Lower;
};

/// Backward-induction least-squares fit of the continuation values of
/// Z_j = phi_star(x + Y_j) - x on the training paths. The regression runs
/// over all paths: the shifted reward is nonzero wherever x + Y > 0, so
/// the classical in-the-money filter has no meaningful analogue here.
/// Rank-deficient dates fall back to a tiny ridge and are recorded in
/// ridge_dates.
RegressionPolicy fit_policy(const PathSet& training, const PayoffSpec& payoff,
                            const DivergenceSpec& spec, double x,
                            const BasisSpec& basis);

/// Mean of Z at the policy's first stop over fresh paths; low-biased for
/// the exact sup over stopping times at the same x.
BoundEstimate lower_bound(const RegressionPolicy& policy, const PathSet& testing,
                          const PayoffSpec& payoff, const DivergenceSpec& spec,
                          double x);

struct PrimalConfig {
    int n_training = 10000;
    int n_testing = 10000;
    std::uint64_t seed = 1;
    int grid_points = 9;  // coarse x-grid size before refinement

    void validate() const;
};

/// Grid diagnostics of the outer x-search (final grid round only).
struct PrimalDiagnostics {
    std::vector<double> grid_x;
    std::vector<double> grid_value;
    std::vector<double> grid_std_error;
};

/// Lower bound of the robust value: minimizes x -> lower_bound(x) with
/// the policy refit at every x. The grid stage reuses one training and
/// one testing sample across all x (common random numbers) so the
/// comparison between shifts is not noise-dominated; golden-section then
/// refines around the grid argmin, and the reported estimate is a final
/// evaluation at the frozen x* on an independent stream. Mean-like kinds
/// skip the search (the objective is flat in x beyond the positive part).
BoundEstimate primal_value(const PathModel& model, const PayoffSpec& payoff,
                           const DivergenceSpec& spec, const BasisSpec& basis,
                           const ShiftSearchConfig& search,
                           const PrimalConfig& cfg,
                           RegressionPolicy* policy_out = nullptr,
                           PrimalDiagnostics* diagnostics = nullptr);

}  // namespace riskstop

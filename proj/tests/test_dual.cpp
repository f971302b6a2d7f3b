// SPDX-License-Identifier: MIT
//
// Nested-simulation dual: exact small cases for the supremum estimator,
// zero variance under a perfect martingale, the upper-bias property
// against an exact binomial value, and the minimum over per-shift
// policies.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "riskstop/dual.hpp"
#include "riskstop/lattice.hpp"

using namespace riskstop;

namespace {

GbmParams one_asset() {
    GbmParams p;
    p.s0 = 100.0;
    p.r = 0.05;
    p.delta = 0.10;
    p.sigma = 0.40;
    p.d = 1;
    return p;
}

}  // namespace

TEST_CASE("supremum estimator on explicit rows") {
    // Two paths, M = 0: per-path sups are 3 and 4, mean 3.5 with standard
    // error sd/sqrt(2) = 0.5.
    Eigen::MatrixXd z(2, 3), m(2, 3);
    z << 0, 3, 2, 0, 1, 4;
    m.setZero();
    const BoundEstimate est = upper_bound_given_martingale(z, m, 0.0);
    CHECK(est.value == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(est.std_error == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(est.n == 2);
    CHECK(est.kind == BoundKind::Upper);
}

TEST_CASE("an exact martingale removes all variance") {
    // One-period problem, z_1 = Y with mean 3. The Doob martingale
    // increment Y - E[Y] makes every path supremum equal E[Y]: the dual
    // estimate is exact with zero standard error.
    const std::vector<double> y = {1.0, 5.0, 2.0, 4.0};
    const double mean = 3.0;
    Eigen::MatrixXd z(4, 2), m(4, 2);
    for (int i = 0; i < 4; ++i) {
        z(i, 0) = 0.0;
        z(i, 1) = y[i];
        m(i, 0) = 0.0;
        m(i, 1) = y[i] - mean;
    }
    const BoundEstimate est = upper_bound_given_martingale(z, m, 0.0);
    CHECK(est.value == doctest::Approx(mean).epsilon(1e-15));
    CHECK(est.std_error == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("martingale increments start at zero and have the right length") {
    const GbmParams p = one_asset();
    const ExerciseGrid grid = ExerciseGrid::equidistant(1.0, 4);
    const BinomialModel model(p, grid);
    const PayoffSpec k{95.0};
    const DivergenceSpec rn = DivergenceSpec::risk_neutral();
    const BasisSpec basis = BasisSpec::sorted_monomials(1, 3);

    const PathSet training = model.sample(2000, 5, StreamPurpose::Training);
    const RegressionPolicy pol = fit_policy(training, k, rn, 0.0, basis);
    const PathSet outer = model.sample(8, 5, StreamPurpose::FinalEval);

    DualConfig cfg;
    cfg.n_outer = 8;
    cfg.n_inner = 50;
    cfg.seed = 5;
    for (int i = 0; i < outer.n_paths; ++i) {
        const auto mart =
            build_martingale_increments(pol, model, outer, i, k, rn, 0.0, cfg);
        REQUIRE(mart.size() == 5);
        CHECK(mart[0] == 0.0);
        for (double v : mart) CHECK(std::isfinite(v));
    }
}

TEST_CASE("dual bound brackets the exact binomial value from above") {
    const GbmParams p = one_asset();
    const ExerciseGrid grid = ExerciseGrid::equidistant(1.0, 4);
    const PayoffSpec k{95.0};
    const double exact =
        snell_envelope(Lattice::binomial(p, grid, k),
                       Lattice::binomial(p, grid, k).payoffs())
            .v0;

    const BinomialModel model(p, grid);
    const DivergenceSpec rn = DivergenceSpec::risk_neutral();
    const BasisSpec basis = BasisSpec::sorted_monomials(1, 3);
    const PathSet training = model.sample(4000, 9, StreamPurpose::Training);
    const RegressionPolicy pol = fit_policy(training, k, rn, 0.0, basis);

    DualConfig cfg;
    cfg.n_outer = 1500;
    cfg.n_inner = 100;
    cfg.seed = 9;
    const PathSet outer = model.sample(cfg.n_outer, 9, StreamPurpose::FinalEval);
    const BoundEstimate ub = upper_bound(pol, model, outer, k, rn, 0.0, cfg);

    CHECK(ub.value >= exact - 3.0 * ub.std_error);
    // A near-optimal policy keeps the duality gap well under one percent
    // of the price at this market size.
    CHECK(ub.value <= exact * 1.01 + 3.0 * ub.std_error);
    CHECK(ub.kind == BoundKind::Upper);

    // The primal sits below the dual: the sandwich around the exact value.
    const PathSet testing = model.sample(4000, 9, StreamPurpose::Testing);
    const BoundEstimate lb = lower_bound(pol, testing, k, rn, 0.0);
    CHECK(lb.value <= ub.value + 3.0 * (lb.std_error + ub.std_error));
}

TEST_CASE("the dual takes the best policy it is given") {
    const GbmModel model(one_asset(), ExerciseGrid::equidistant(1.0, 3));
    const PayoffSpec k{95.0};
    const DivergenceSpec rn = DivergenceSpec::risk_neutral();
    const BasisSpec basis = BasisSpec::sorted_monomials(1, 2);
    const PathSet training = model.sample(2000, 13, StreamPurpose::Training);
    const RegressionPolicy good = fit_policy(training, k, rn, 0.0, basis);

    // Sabotage: a huge root continuation plus huge fitted intercepts makes
    // the rule wait until the horizon no matter what it sees.
    RegressionPolicy bad = good;
    bad.root_continuation = 1e9;
    for (auto& c : bad.coeffs) {
        c.setZero();
        c(0) = 1e9;
    }

    DualConfig cfg;
    cfg.n_outer = 400;
    cfg.n_inner = 60;
    cfg.seed = 13;

    const std::vector<RegressionPolicy> both = {good, bad};
    const BoundEstimate best = dual_value(model, k, rn, both, cfg);
    const BoundEstimate only_good = dual_value(model, k, rn, {&both[0], 1}, cfg);
    const BoundEstimate only_bad = dual_value(model, k, rn, {&both[1], 1}, cfg);

    // Identical streams, so the minimum is exact, not statistical. (No
    // claim about which policy wins: both induce valid martingales, and
    // tightness does not order with policy quality in general.)
    CHECK(best.value ==
          doctest::Approx(std::min(only_good.value, only_bad.value))
              .epsilon(1e-12));
}

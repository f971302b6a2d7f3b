// SPDX-License-Identifier: MIT
//
// Divergence conjugates and the optimized certainty equivalent.
//
// The conjugate values are frozen by hand from the closed forms, the
// derivative is cross-checked by finite differences, and the 1-D shift
// search is verified against minima computed analytically for simple
// samples (constants, two-point laws) plus the log-sum-exp closed form
// for the entropic case.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "riskstop/divergence.hpp"

using namespace riskstop;

namespace {

const std::vector<DivergenceSpec> kAllKinds = {
    DivergenceSpec::avar(0.5), DivergenceSpec::avar(1.0),
    DivergenceSpec::entropic(0.7), DivergenceSpec::power(2.0),
    DivergenceSpec::power(3.0), DivergenceSpec::risk_neutral()};

}  // namespace

TEST_CASE("conjugate closed forms at hand-picked points") {
    // AVaR: positive part scaled by 1/alpha.
    CHECK(phi_star(DivergenceSpec::avar(0.5), 2.0) == doctest::Approx(4.0));
    CHECK(phi_star(DivergenceSpec::avar(0.25), 2.0) == doctest::Approx(8.0));
    CHECK(phi_star(DivergenceSpec::avar(0.5), -1.0) == 0.0);

    // Entropic: expm1(gamma y) / gamma.
    CHECK(phi_star(DivergenceSpec::entropic(0.5), 2.0) ==
          doctest::Approx(2.0 * (std::exp(1.0) - 1.0)).epsilon(1e-14));
    CHECK(phi_star(DivergenceSpec::entropic(0.5), -10.0) ==
          doctest::Approx(2.0 * (std::exp(-5.0) - 1.0)).epsilon(1e-14));

    // Power p: (y+)^{p/(p-1)} (p-1)/p.
    CHECK(phi_star(DivergenceSpec::power(2.0), 3.0) == doctest::Approx(4.5));
    CHECK(phi_star(DivergenceSpec::power(3.0), 4.0) ==
          doctest::Approx(16.0 / 3.0).epsilon(1e-14));
    CHECK(phi_star(DivergenceSpec::power(2.0), -0.5) == 0.0);

    CHECK(phi_star(DivergenceSpec::risk_neutral(), 2.0) == 2.0);
    CHECK(phi_star(DivergenceSpec::risk_neutral(), -3.0) == 0.0);

    for (const auto& spec : kAllKinds) CHECK(phi_star(spec, 0.0) == 0.0);
}

TEST_CASE("power conjugate equals the brute-force sup over densities") {
    // phi_star(y) = sup_{z >= 0} (z y - z^2/2) for p = 2; scanning z on a
    // fine grid must land on the closed form.
    const DivergenceSpec spec = DivergenceSpec::power(2.0);
    for (double y : {0.5, 1.0, 3.0}) {
        double best = 0.0;
        for (double z = 0.0; z <= 50.0; z += 1e-4)
            best = std::max(best, z * y - 0.5 * z * z);
        CHECK(phi_star(spec, y) == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("conjugates are convex and nondecreasing") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (const auto& spec : kAllKinds) {
        for (int i = 0; i < 200; ++i) {
            double a = u(gen), b = u(gen);
            if (a > b) std::swap(a, b);
            const double mid = 0.5 * (a + b);
            CHECK(phi_star(spec, mid) <=
                  0.5 * (phi_star(spec, a) + phi_star(spec, b)) + 1e-12);
            CHECK(phi_star(spec, a) <= phi_star(spec, b) + 1e-12);
        }
    }
}

TEST_CASE("right derivative matches the closed forms and finite differences") {
    CHECK(phi_star_right_deriv(DivergenceSpec::avar(0.5), 0.0) == 2.0);
    CHECK(phi_star_right_deriv(DivergenceSpec::avar(0.5), -0.1) == 0.0);
    CHECK(phi_star_right_deriv(DivergenceSpec::risk_neutral(), 0.0) == 1.0);
    CHECK(phi_star_right_deriv(DivergenceSpec::entropic(0.5), 2.0) ==
          doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(phi_star_right_deriv(DivergenceSpec::power(2.0), 3.0) ==
          doctest::Approx(3.0));

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    const double h = 1e-7;
    for (const auto& spec : kAllKinds) {
        for (int i = 0; i < 50; ++i) {
            // Nudge away from the kink at 0 where the one-sided limit and
            // the two-point quotient disagree by design.
            double y = u(gen);
            if (std::abs(y) < 1e-3) y += 0.1;
            const double fd = (phi_star(spec, y + h) - phi_star(spec, y)) / h;
            CHECK(phi_star_right_deriv(spec, y) ==
                  doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(DivergenceSpec::avar(0.0).validate(), ValidationError);
    CHECK_THROWS_AS(DivergenceSpec::avar(1.2).validate(), ValidationError);
    CHECK_THROWS_AS(DivergenceSpec::entropic(-1.0).validate(), ValidationError);
    CHECK_THROWS_AS(DivergenceSpec::entropic(0.0).validate(), ValidationError);
    CHECK_THROWS_AS(DivergenceSpec::power(1.0).validate(), ValidationError);
    CHECK_THROWS_AS(DivergenceSpec::power(0.5).validate(), ValidationError);
    CHECK_NOTHROW(DivergenceSpec::avar(1.0).validate());
    CHECK_NOTHROW(DivergenceSpec::entropic(0.01).validate());
    CHECK_NOTHROW(DivergenceSpec::power(2.0).validate());
    CHECK_NOTHROW(DivergenceSpec::risk_neutral().validate());

    CHECK_THROWS_AS([] { ShiftSearchConfig c; c.x_tolerance = 0.0; c.validate(); }(),
                    ValidationError);
    CHECK_THROWS_AS([] { ShiftSearchConfig c; c.max_iterations = 0; c.validate(); }(),
                    ValidationError);
}

TEST_CASE("risk labels round-trip through the parser") {
    for (const auto& spec : kAllKinds) {
        const DivergenceSpec back = parse_risk(spec.label());
        CHECK(back.kind == spec.kind);
        CHECK(back.param == doctest::Approx(spec.param).epsilon(1e-12));
    }
    CHECK(parse_risk("neutral").mean_like());
    CHECK(parse_risk("riskneutral").kind == DivergenceKind::RiskNeutral);

    CHECK_THROWS_AS(parse_risk("avar"), ValidationError);
    CHECK_THROWS_AS(parse_risk("avar:"), ValidationError);
    CHECK_THROWS_AS(parse_risk("avar:abc"), ValidationError);
    CHECK_THROWS_AS(parse_risk("avar:0.5x"), ValidationError);
    CHECK_THROWS_AS(parse_risk("foo:1"), ValidationError);
    CHECK_THROWS_AS(parse_risk("neutral:1"), ValidationError);
    CHECK_THROWS_AS(parse_risk(""), ValidationError);
}

TEST_CASE("mean-like detection") {
    CHECK(DivergenceSpec::risk_neutral().mean_like());
    CHECK(DivergenceSpec::avar(1.0).mean_like());
    CHECK_FALSE(DivergenceSpec::avar(0.5).mean_like());
    CHECK_FALSE(DivergenceSpec::entropic(0.01).mean_like());
    CHECK_FALSE(DivergenceSpec::power(2.0).mean_like());
}

TEST_CASE("sample objective at fixed shifts") {
    const std::vector<double> y123 = {1.0, 2.0, 3.0};
    CHECK(oce_objective(DivergenceSpec::risk_neutral(), y123, 0.0) ==
          doctest::Approx(2.0));

    // AVaR(0.5) on {0, 2} at x = -1: mean(0, 2 * 1) - (-1) = 2.
    const std::vector<double> y02 = {0.0, 2.0};
    CHECK(oce_objective(DivergenceSpec::avar(0.5), y02, -1.0) ==
          doctest::Approx(2.0));

    CHECK_THROWS_AS(oce_objective(DivergenceSpec::risk_neutral(), {}, 0.0),
                    ValidationError);
}

TEST_CASE("shift search on samples with known minima") {
    // Mean-like kinds shortcut to the sample mean of the positive parts.
    {
        const std::vector<double> y = {1.0, 2.0, 3.0};
        const OceResult r = oce_value(DivergenceSpec::risk_neutral(), y);
        CHECK(r.value == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(r.x_star == 0.0);
    }

    // AVaR(0.5) of a positive constant c: on x in [-c, 0] the objective is
    // 2(x + c) - x = x + 2c, decreasing to the left, so the minimum sits at
    // x = -c with value c.
    {
        const std::vector<double> y = {5.0, 5.0};
        const OceResult r = oce_value(DivergenceSpec::avar(0.5), y);
        CHECK(r.value == doctest::Approx(5.0).epsilon(1e-7));
        CHECK(r.evaluations > 0);
    }

    // Entropic certainty equivalent of a constant is the constant.
    {
        const std::vector<double> y = {3.0, 3.0, 3.0};
        const OceResult r = oce_value(DivergenceSpec::entropic(0.8), y);
        CHECK(r.value == doctest::Approx(3.0).epsilon(1e-7));
        CHECK(r.x_star == doctest::Approx(-3.0).epsilon(1e-4));
    }

    // Power(2) on a constant c: minimize (x+c)^2/2 - x; the minimizer is
    // x = 1 - c and the value c - 1/2.
    {
        const std::vector<double> y = {3.0};
        const OceResult r = oce_value(DivergenceSpec::power(2.0), y);
        CHECK(r.value == doctest::Approx(2.5).epsilon(1e-7));
        CHECK(r.x_star == doctest::Approx(-2.0).epsilon(1e-4));
    }

    // Entropic two-point law against the independent log-sum-exp route.
    {
        const std::vector<double> y = {0.0, 2.0};
        const OceResult r = oce_value(DivergenceSpec::entropic(0.5), y);
        const double expect = 2.0 * std::log((1.0 + std::exp(1.0)) / 2.0);
        CHECK(r.value == doctest::Approx(expect).epsilon(1e-8));
        CHECK(entropic_closed_form(0.5, y) ==
              doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("shift search agrees with the entropic closed form on random samples") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> gamma_u(0.05, 2.0);
    std::uniform_real_distribution<double> point_u(0.0, 6.0);
    std::uniform_int_distribution<int> size_u(2, 40);
    for (int rep = 0; rep < 25; ++rep) {
        const double gamma = gamma_u(gen);
        std::vector<double> y(size_u(gen));
        for (auto& v : y) v = point_u(gen);
        const OceResult r = oce_value(DivergenceSpec::entropic(gamma), y);
        const double reference = entropic_closed_form(gamma, y);
        CHECK(std::abs(r.value - reference) < 1e-8);
    }
}

TEST_CASE("avar shift search respects the nonpositive cap") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> point_u(0.0, 10.0);
    for (double alpha : {0.25, 0.5, 0.9}) {
        std::vector<double> y(25);
        for (auto& v : y) v = point_u(gen);
        const OceResult r = oce_value(DivergenceSpec::avar(alpha), y);
        CHECK(r.x_star <= 1e-10);
        // The capped search can never beat the uncapped objective anywhere
        // on the allowed half-line.
        for (double x : {-9.0, -4.0, -1.0, -0.25, 0.0})
            CHECK(r.value <= oce_objective(DivergenceSpec::avar(alpha), y, x) + 1e-9);
    }
}

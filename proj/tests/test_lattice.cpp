// SPDX-License-Identifier: MIT
//
// Scenario-tree oracles. The values asserted here are worked out by hand
// on trees small enough to solve with pencil and a few minutes:
//
//   chain      1 -> 5 -> 3, single branch, Snell value 5
//   two-period root 1; children 2 (p .5, leaves 6/.3, 0/.7) and 4 (p .5,
//              leaf 1); Snell value 3
//   gap        root 4.9; leaves 10/.25 and 0/.75. Under avar:0.5 the best
//              pure rule is worth 5, while the randomized game value is
//              6.6 at the shift x = -3.2 with stopping mass 1/3 at the
//              root: the minimax gap closes only on randomized rules.
//
// Random trees then cross-check dynamic programming against exhaustive
// rule enumeration, the pathwise dual identity, the tail-integral
// representation, and the saddle inequalities.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "riskstop/lattice.hpp"

using namespace riskstop;

namespace {

int add_node(Lattice& lat, int parent, double payoff, double prob,
             double state = 0.0) {
    LatticeNode n;
    n.payoff = payoff;
    n.state = state;
    n.parent = parent;
    n.level = parent < 0 ? 0 : lat.nodes[parent].level + 1;
    lat.nodes.push_back(n);
    const int id = static_cast<int>(lat.nodes.size()) - 1;
    if (parent >= 0) {
        lat.nodes[parent].children.push_back(id);
        lat.nodes[parent].probs.push_back(prob);
    }
    return id;
}

Lattice make_chain() {
    Lattice lat;
    lat.dates = {0.0, 0.5, 1.0};
    const int root = add_node(lat, -1, 1.0, 0.0);
    const int mid = add_node(lat, root, 5.0, 1.0);
    add_node(lat, mid, 3.0, 1.0);
    lat.validate();
    return lat;
}

Lattice make_two_period() {
    Lattice lat;
    lat.dates = {0.0, 0.5, 1.0};
    const int root = add_node(lat, -1, 1.0, 0.0);
    const int a = add_node(lat, root, 2.0, 0.5);
    const int b = add_node(lat, root, 4.0, 0.5);
    add_node(lat, a, 6.0, 0.3);
    add_node(lat, a, 0.0, 0.7);
    add_node(lat, b, 1.0, 1.0);
    lat.validate();
    return lat;
}

Lattice make_gap() {
    Lattice lat;
    lat.dates = {0.0, 1.0};
    const int root = add_node(lat, -1, 4.9, 0.0);
    add_node(lat, root, 10.0, 0.25);
    add_node(lat, root, 0.0, 0.75);
    lat.validate();
    return lat;
}

std::vector<double> shifted_rewards(const Lattice& lat,
                                    const DivergenceSpec& spec, double x) {
    std::vector<double> z(lat.nodes.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = phi_star(spec, x + lat.nodes[i].payoff) - x;
    return z;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i)
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return xs;
}

}  // namespace

TEST_CASE("hand-solved Snell values") {
    {
        const Lattice lat = make_chain();
        const SnellResult s = snell_envelope(lat, lat.payoffs());
        CHECK(s.v0 == doctest::Approx(5.0).epsilon(1e-15));
        CHECK(s.value[2] == 3.0);
        CHECK(s.continuation[0] == doctest::Approx(5.0));
    }
    {
        const Lattice lat = make_two_period();
        const SnellResult s = snell_envelope(lat, lat.payoffs());
        CHECK(s.v0 == doctest::Approx(3.0).epsilon(1e-15));
        // Branch values: continuation 1.8 < 2 at node a, 1 < 4 at node b.
        CHECK(s.value[1] == doctest::Approx(2.0));
        CHECK(s.value[2] == doctest::Approx(4.0));
    }
}

TEST_CASE("structure helpers") {
    const Lattice two = make_two_period();
    CHECK(rule_count(make_chain()) == 3);
    CHECK(rule_count(two) == 5);

    const std::vector<double> reach = reach_probabilities(two);
    const std::vector<double> expect = {1.0, 0.5, 0.5, 0.15, 0.35, 0.5};
    REQUIRE(reach.size() == expect.size());
    for (std::size_t i = 0; i < reach.size(); ++i)
        CHECK(reach[i] == doctest::Approx(expect[i]).epsilon(1e-15));

    int paths = 0;
    double total = 0.0;
    for_each_leaf_path(two, [&](const std::vector<int>& nodes, double p) {
        ++paths;
        total += p;
        CHECK(nodes.front() == 0);
        CHECK(two.is_leaf(nodes.back()));
    });
    CHECK(paths == 3);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("validation rejects malformed trees") {
    Lattice lat = make_two_period();
    lat.nodes[1].probs[0] = 0.2;  // branch probabilities now sum to 0.9
    CHECK_THROWS_AS(lat.validate(), ValidationError);

    lat = make_two_period();
    lat.nodes[3].payoff = -1.0;
    CHECK_THROWS_AS(lat.validate(), ValidationError);

    lat = make_two_period();
    lat.nodes[1].children.clear();  // leaf stranded before the final level
    lat.nodes[1].probs.clear();
    CHECK_THROWS_AS(lat.validate(), ValidationError);
}

TEST_CASE("fixture JSON round trip") {
    const Lattice lat = make_two_period();
    const Lattice back = lattice_from_json(lattice_to_json(lat));
    back.validate();
    REQUIRE(back.nodes.size() == lat.nodes.size());
    CHECK(back.dates == lat.dates);
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        CHECK(back.nodes[i].payoff == lat.nodes[i].payoff);
        CHECK(back.nodes[i].parent == lat.nodes[i].parent);
        CHECK(back.nodes[i].children == lat.nodes[i].children);
    }

    CHECK_THROWS_AS(lattice_from_json(nlohmann::json::object()), ValidationError);
}

TEST_CASE("dynamic programming equals exhaustive enumeration") {
    // Plain payoffs and shifted rewards; the latter is what the robust
    // search feeds through the same DP.
    const DivergenceSpec avar = DivergenceSpec::avar(0.5);
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const Lattice lat = random_tree(seed);
        {
            const auto y = lat.payoffs();
            const SnellResult s = snell_envelope(lat, y);
            const EnumerationResult e = enumerate_stopping_times(lat, y);
            CHECK(std::abs(s.v0 - e.value) <= 1e-12);
            CHECK(rule_value(lat, y, e.rule) == doctest::Approx(e.value));
        }
        {
            const auto z = shifted_rewards(lat, avar, -1.0);
            const SnellResult s = snell_envelope(lat, z);
            const EnumerationResult e = enumerate_stopping_times(lat, z);
            CHECK(std::abs(s.v0 - e.value) <= 1e-12);
        }
    }
}

TEST_CASE("Doob-Meyer split reconstructs the envelope") {
    for (std::uint64_t seed : {3u, 9u, 27u}) {
        const Lattice lat = random_tree(seed);
        const auto y = lat.payoffs();
        const SnellResult s = snell_envelope(lat, y);
        for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
            CHECK(std::abs(s.value[i] - (s.v0 + s.martingale[i] - s.compensator[i])) <=
                  1e-12);
            CHECK(s.compensator[i] >= -1e-15);
            if (lat.nodes[i].parent >= 0)  // the compensator never shrinks
                CHECK(s.compensator[i] >=
                      s.compensator[lat.nodes[i].parent] - 1e-15);
        }
    }
}

TEST_CASE("pathwise dual identity holds exactly") {
    for (std::uint64_t seed : {5u, 6u, 7u, 8u}) {
        const Lattice lat = random_tree(seed);
        const PathwiseDualReport r = pathwise_dual_check(lat, lat.payoffs());
        CHECK(r.max_deviation <= 1e-12);
        CHECK(r.sup_variance <= 1e-18);
        CHECK(r.sup_mean == doctest::Approx(r.v0).epsilon(1e-12));
    }
}

TEST_CASE("masked exercise and dyadic coarsening") {
    const Lattice chain = make_chain();
    const auto y = chain.payoffs();

    // Allowing every date reproduces the envelope; leaf-only forces the
    // horizon value.
    const std::vector<char> all = {1, 1, 1};
    const std::vector<char> leaf_only = {0, 0, 1};
    CHECK(snell_value_masked(chain, y, all) == doctest::Approx(5.0));
    CHECK(snell_value_masked(chain, y, leaf_only) == doctest::Approx(3.0));

    // Dates are {0, .5, 1}: at level 0 only integer times survive, at
    // level 1 halves do as well; time 0 is never exercisable.
    CHECK(dyadic_exercise_mask(chain, 0) == std::vector<char>{0, 0, 1});
    CHECK(dyadic_exercise_mask(chain, 1) == std::vector<char>{0, 1, 1});

    // A stop at the excluded middle date rolls forward to the leaf.
    const std::vector<char> stop_mid = {0, 1, 0};
    const std::vector<char> coarse = coarsen_stopping_rule(chain, stop_mid, 0);
    CHECK(rule_value(chain, y, coarse) == doctest::Approx(3.0));

    // Coarse values increase toward the full envelope as the mask refines.
    const Lattice tree = random_tree(41, 4, 2);
    const auto ty = tree.payoffs();
    double prev = 0.0;
    for (int level = 0; level <= 6; ++level) {
        const auto mask = dyadic_exercise_mask(tree, level);
        const double v = snell_value_masked(tree, ty, mask);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    CHECK(snell_envelope(tree, ty).v0 >= prev - 1e-12);
}

TEST_CASE("empirical distributions merge duplicate support points") {
    const EmpiricalDistribution d = EmpiricalDistribution::from_weighted(
        {{2.0, 0.25}, {0.0, 0.5}, {2.0, 0.25}});
    REQUIRE(d.points.size() == 2);
    CHECK(d.points[0] == 0.0);
    CHECK(d.points[1] == 2.0);
    CHECK(d.probs[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.probs[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("tail integral equals the direct expectation") {
    // Hand value: avar:0.5 on {0 w .5, 2 w .5} at x = -1 gives
    // E[2 (x+Y)+] - x = 1 + 1 = 2 on both routes.
    EmpiricalDistribution d;
    d.points = {0.0, 2.0};
    d.probs = {0.5, 0.5};
    const DivergenceSpec avar = DivergenceSpec::avar(0.5);
    CHECK(expectation_objective(d, avar, -1.0) == doctest::Approx(2.0));
    CHECK(tail_integral_objective(d, avar, -1.0) ==
          doctest::Approx(2.0).epsilon(1e-14));

    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> point_u(0.0, 8.0);
    std::uniform_real_distribution<double> x_u(-6.0, 3.0);
    const std::vector<DivergenceSpec> kinds = {
        DivergenceSpec::avar(0.4), DivergenceSpec::entropic(0.6),
        DivergenceSpec::power(2.5), DivergenceSpec::risk_neutral()};
    for (int rep = 0; rep < 30; ++rep) {
        const int m = 1 + static_cast<int>(gen() % 6);
        std::vector<std::pair<double, double>> pw;
        for (int i = 0; i < m; ++i) pw.push_back({point_u(gen), 1.0 / m});
        const EmpiricalDistribution dist =
            EmpiricalDistribution::from_weighted(pw);
        for (const auto& spec : kinds) {
            const double x = x_u(gen);
            const double direct = expectation_objective(dist, spec, x);
            const double tail = tail_integral_objective(dist, spec, x);
            CHECK(std::abs(direct - tail) <= 1e-10);
        }
    }
}

TEST_CASE("robust tree value matches a dense shift grid") {
    const Lattice lat = make_two_period();
    const auto y = lat.payoffs();
    const std::vector<DivergenceSpec> kinds = {DivergenceSpec::avar(0.5),
                                               DivergenceSpec::entropic(0.7),
                                               DivergenceSpec::power(2.0)};
    for (const auto& spec : kinds) {
        const RobustLatticeResult r = robust_value_lattice(lat, y, spec);
        double ref = std::numeric_limits<double>::infinity();
        const double hi = spec.kind == DivergenceKind::AVaR ? 0.0 : 7.0;
        for (double x = -7.0; x <= hi + 1e-12; x += 1e-4) {
            const auto z = shifted_rewards(lat, spec, x);
            ref = std::min(ref, snell_envelope(lat, z).v0);
        }
        CHECK(std::abs(r.value - ref) <= 1e-6);
    }
}

TEST_CASE("avar robust values decrease in the level, entropic increase in gamma") {
    const Lattice lat = random_tree(57, 4, 3);
    const auto y = lat.payoffs();
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {0.3, 0.5, 0.7, 0.9}) {
        const double v =
            robust_value_lattice(lat, y, DivergenceSpec::avar(alpha)).value;
        CHECK(v <= prev + 1e-9);
        prev = v;
    }
    prev = -std::numeric_limits<double>::infinity();
    for (double gamma : {0.1, 0.5, 1.0}) {
        const double v =
            robust_value_lattice(lat, y, DivergenceSpec::entropic(gamma)).value;
        CHECK(v >= prev - 1e-9);
        prev = v;
    }
}

TEST_CASE("mixing kernels mixes laws and objectives affinely") {
    const Lattice lat = make_gap();
    const auto y = lat.payoffs();
    const std::vector<char> at_root = {1, 0, 0};
    const std::vector<char> at_leaves = {0, 1, 1};
    const RandomizedKernel a = kernel_from_rule(lat, at_root);
    const RandomizedKernel b = kernel_from_rule(lat, at_leaves);
    const double lambda = 0.375;
    const RandomizedKernel mix = mix_kernels(a, b, lambda);
    mix.validate(lat);

    const EmpiricalDistribution da = kernel_distribution(lat, y, a);
    const EmpiricalDistribution db = kernel_distribution(lat, y, b);
    const EmpiricalDistribution dm = kernel_distribution(lat, y, mix);
    const EmpiricalDistribution expect = EmpiricalDistribution::from_weighted(
        {{4.9, lambda}, {10.0, (1 - lambda) * 0.25}, {0.0, (1 - lambda) * 0.75}});
    REQUIRE(dm.points == expect.points);
    for (std::size_t i = 0; i < dm.probs.size(); ++i)
        CHECK(dm.probs[i] == doctest::Approx(expect.probs[i]).epsilon(1e-15));

    const DivergenceSpec spec = DivergenceSpec::avar(0.5);
    for (double x : {-3.2, -1.0, 0.0}) {
        const double ha = kernel_objective(lat, y, a, spec, x);
        const double hb = kernel_objective(lat, y, b, spec, x);
        const double hm = kernel_objective(lat, y, mix, spec, x);
        CHECK(std::abs(hm - (lambda * ha + (1 - lambda) * hb)) <= 1e-12);
        // The kernel pairing and the distribution route agree.
        CHECK(kernel_objective(lat, y, a, spec, x) ==
              doctest::Approx(expectation_objective(da, spec, x)).epsilon(1e-12));
        CHECK(kernel_objective(lat, y, b, spec, x) ==
              doctest::Approx(expectation_objective(db, spec, x)).epsilon(1e-12));
    }
}

TEST_CASE("the gap tree needs randomization to close the minimax gap") {
    const Lattice lat = make_gap();
    const auto y = lat.payoffs();
    const DivergenceSpec spec = DivergenceSpec::avar(0.5);

    const RobustLatticeResult robust = robust_value_lattice(lat, y, spec);
    CHECK(robust.value == doctest::Approx(6.6).epsilon(1e-7));
    CHECK(robust.x_star == doctest::Approx(-3.2).epsilon(1e-4));

    const auto grid = linspace(-11.0, 0.0, 241);
    const MinimaxReport mm = minimax_check(lat, y, spec, grid);
    CHECK(mm.inf_sup == doctest::Approx(6.6).epsilon(1e-7));
    CHECK(mm.sup_inf_randomized == doctest::Approx(6.6).epsilon(1e-6));
    CHECK(mm.sup_inf_deterministic == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(mm.sup_inf_deterministic <= mm.sup_inf_randomized + 1e-9);
    CHECK(mm.sup_inf_randomized <= mm.inf_sup + 1e-6);
    CHECK(mm.kernel.mass[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));

    const SaddleResult saddle = find_saddle(lat, y, spec, grid);
    CHECK(saddle.value == doctest::Approx(6.6).epsilon(1e-6));
    CHECK(saddle.x_star == doctest::Approx(-3.2).epsilon(1e-4));
    CHECK(saddle.left_violation <= 1e-8);
    CHECK(saddle.right_violation <= 1e-8);
}

TEST_CASE("minimax equality on random trees") {
    const DivergenceSpec spec = DivergenceSpec::avar(0.6);
    for (std::uint64_t seed : {201u, 202u, 203u}) {
        const Lattice lat = random_tree(seed, 3, 2, 600);
        const auto y = lat.payoffs();
        double ymax = 0.0;
        for (double v : y) ymax = std::max(ymax, v);
        const auto grid = linspace(-(ymax + 1.0), 0.0, 201);
        // minimax_check throws when the two game values drift apart, so
        // the assertion is the call itself.
        const MinimaxReport mm = minimax_check(lat, y, spec, grid);
        CHECK(mm.sup_inf_deterministic <= mm.sup_inf_randomized + 1e-9);
    }
}

TEST_CASE("binomial tree construction is moment matched") {
    GbmParams p;
    p.d = 1;
    p.s0 = 100.0;
    p.sigma = 0.4;
    p.delta = 0.0;
    const ExerciseGrid grid = ExerciseGrid::equidistant(1.0, 2);
    const Lattice lat = Lattice::binomial(p, grid, PayoffSpec{95.0});
    lat.validate();
    REQUIRE(lat.nodes.size() == 7);  // 1 + 2 + 4, non-recombining

    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        const auto& n = lat.nodes[i];
        if (n.children.empty()) continue;
        REQUIRE(n.children.size() == 2);
        double mean = 0.0;
        for (std::size_t k = 0; k < n.children.size(); ++k)
            mean += n.probs[k] * lat.nodes[n.children[k]].state;
        // Drift matching is exact by construction.
        CHECK(mean == doctest::Approx(n.state * std::exp(p.r * 0.5)).epsilon(1e-13));
    }

    // Discounted payoffs at the nodes follow from the states.
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        const auto& n = lat.nodes[i];
        const double t = lat.dates[n.level];
        const double expect =
            std::exp(-p.r * t) * std::max(n.state - 95.0, 0.0);
        CHECK(n.payoff == doctest::Approx(expect).epsilon(1e-13));
    }

    const SnellResult s = snell_envelope(lat, lat.payoffs());
    const EnumerationResult e = enumerate_stopping_times(lat, lat.payoffs());
    CHECK(std::abs(s.v0 - e.value) <= 1e-12);
}

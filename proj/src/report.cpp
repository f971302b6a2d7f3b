// SPDX-License-Identifier: MIT
#include "riskstop/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "riskstop/dual.hpp"
#include "riskstop/errors.hpp"

namespace riskstop {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string kind_of(const DivergenceSpec& spec) {
    switch (spec.kind) {
        case DivergenceKind::AVaR: return "avar";
        case DivergenceKind::Entropic: return "entropic";
        case DivergenceKind::Power: return "power";
        case DivergenceKind::RiskNeutral: return "neutral";
    }
    return "unknown";
}

}  // namespace

std::string report_csv(std::span<const ReportRow> rows, bool with_timing) {
    std::string out = "risk,label,lower,lower_sd,upper,upper_sd,x_star,seconds\n";
    for (const auto& r : rows) {
        out += r.risk + "," + r.label + "," + fmt_g(r.lower.value) + "," +
               fmt_g(r.lower.std_error) + "," + fmt_g(r.upper.value) + "," +
               fmt_g(r.upper.std_error) + "," + fmt_g(r.x_star) + "," +
               fmt_g(with_timing ? r.seconds : 0.0) + "\n";
    }
    return out;
}

nlohmann::json report_json(std::span<const ReportRow> rows, bool with_timing) {
    nlohmann::json doc;
    auto& arr = doc["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"risk", r.risk},
                       {"label", r.label},
                       {"lower", r.lower.value},
                       {"lower_sd", r.lower.std_error},
                       {"upper", r.upper.value},
                       {"upper_sd", r.upper.std_error},
                       {"x_star", r.x_star},
                       {"seconds", with_timing ? r.seconds : 0.0}});
    }
    return doc;
}

ReportRow price_row(const RunConfig& cfg, const DivergenceSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const GbmModel model(cfg.market, cfg.grid);
    const BasisSpec basis =
        BasisSpec::sorted_monomials(cfg.market.d, cfg.basis_degree);
    PrimalConfig primal_cfg;
    primal_cfg.n_training = cfg.n_training;
    primal_cfg.n_testing = cfg.n_testing;
    primal_cfg.seed = cfg.seed;
    primal_cfg.grid_points = cfg.grid_points;

    RegressionPolicy policy;
    const BoundEstimate lower = primal_value(model, cfg.payoff, spec, basis,
                                             cfg.search, primal_cfg, &policy);

    DualConfig dual_cfg;
    dual_cfg.n_outer = cfg.n_testing;
    dual_cfg.n_inner = cfg.n_inner;
    dual_cfg.seed = cfg.seed;
    const BoundEstimate upper =
        dual_value(model, cfg.payoff, spec, {&policy, 1}, dual_cfg);

    ReportRow row;
    row.risk = kind_of(spec);
    row.label = spec.label();
    row.lower = lower;
    row.upper = upper;
    row.x_star = lower.x_star;
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return row;
}

std::vector<ReportRow> price_table(const RunConfig& cfg) {
    if (cfg.risks.empty())
        throw ValidationError("table: the risk list is empty");
    std::vector<ReportRow> rows;
    rows.reserve(cfg.risks.size());
    for (const auto& spec : cfg.risks) rows.push_back(price_row(cfg, spec));
    return rows;
}

// ---------------------------------------------------------------------------
// Fixtures

namespace {

int add_node(Lattice& lat, int parent, double payoff) {
    LatticeNode n;
    n.payoff = payoff;
    n.parent = parent;
    n.level = parent < 0 ? 0 : lat.nodes[parent].level + 1;
    lat.nodes.push_back(std::move(n));
    const int id = static_cast<int>(lat.nodes.size()) - 1;
    if (parent >= 0) lat.nodes[parent].children.push_back(id);
    return id;
}

Lattice make_chain() {
    Lattice lat;
    lat.dates = {0.0, 1.0, 2.0};
    const int a = add_node(lat, -1, 1.0);
    const int b = add_node(lat, a, 2.5);
    add_node(lat, b, 0.5);
    lat.nodes[a].probs = {1.0};
    lat.nodes[b].probs = {1.0};
    lat.validate();
    return lat;
}

Lattice make_two_period() {
    Lattice lat;
    lat.dates = {0.0, 0.5, 1.0};
    const int root = add_node(lat, -1, 1.25);
    const int a = add_node(lat, root, 2.5);
    const int b = add_node(lat, root, 0.75);
    add_node(lat, a, 4.0);
    add_node(lat, a, 0.5);
    add_node(lat, b, 1.75);
    add_node(lat, b, 3.25);
    lat.nodes[root].probs = {0.4, 0.6};
    lat.nodes[a].probs = {0.5, 0.5};
    lat.nodes[b].probs = {0.3, 0.7};
    lat.validate();
    return lat;
}

// One-period tree where no pure rule reaches the randomized value under
// avar:0.5: stopping at the root is worth 4.9, stopping at the leaves is
// worth 5, but the 1/3-2/3 mixture of the two rules is worth 6.6.
Lattice make_gap_one_period() {
    Lattice lat;
    lat.dates = {0.0, 1.0};
    const int root = add_node(lat, -1, 4.9);
    add_node(lat, root, 10.0);
    add_node(lat, root, 0.0);
    lat.nodes[root].probs = {0.25, 0.75};
    lat.validate();
    return lat;
}

Lattice make_binomial4() {
    GbmParams p;
    p.s0 = 100.0;
    p.r = 0.05;
    p.delta = 0.0;
    p.sigma = 0.4;
    p.d = 1;
    PayoffSpec pay;
    pay.strike = 95.0;
    return Lattice::binomial(p, ExerciseGrid::equidistant(1.0, 4), pay);
}

}  // namespace

std::vector<NamedFixture> builtin_fixtures() {
    std::vector<NamedFixture> out;
    out.push_back({"chain", make_chain()});
    out.push_back({"two_period", make_two_period()});
    out.push_back({"gap_one_period", make_gap_one_period()});
    out.push_back({"binomial4", make_binomial4()});
    out.push_back({"random4", random_tree(11, 4, 3, 3000)});
    return out;
}

// ---------------------------------------------------------------------------
// Oracle suite

namespace {

void expect(bool ok, const std::string& why) {
    if (!ok) throw NumericError(why);
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

}  // namespace

OracleOutcome run_oracle_suite(std::span<const NamedFixture> fixtures,
                               std::ostream& out) {
    OracleOutcome oc;
    auto guard = [&](const std::string& name, auto&& body) {
        try {
            const std::string detail = body();
            ++oc.passed;
            out << "ok   " << name;
            if (!detail.empty()) out << "  [" << detail << "]";
            out << "\n";
        } catch (const std::exception& e) {
            ++oc.failed;
            out << "FAIL " << name << ": " << e.what() << "\n";
        }
    };
    auto skip = [&](const std::string& name, const std::string& why) {
        ++oc.skipped;
        out << "skip " << name << ": " << why << "\n";
    };

    const std::vector<DivergenceSpec> specs = {
        DivergenceSpec::avar(0.5), DivergenceSpec::avar(0.75),
        DivergenceSpec::entropic(0.05), DivergenceSpec::power(2.0),
        DivergenceSpec::risk_neutral()};
    constexpr std::uint64_t kCap = 1u << 20;
    constexpr std::uint64_t kSmall = 5000;  // per-rule searches stay cheap

    for (const auto& fixture : fixtures) {
        const Lattice& lat = fixture.lattice;
        const std::string tag = fixture.name;
        const std::vector<double> y = lat.payoffs();
        const std::uint64_t rules = rule_count(lat);
        double y_max = 0.0;
        for (double v : y) y_max = std::max(y_max, v);

        guard(tag + ".validate", [&] {
            lat.validate();
            return "nodes=" + std::to_string(lat.nodes.size()) +
                   " rules=" + std::to_string(rules);
        });

        const SnellResult snell = snell_envelope(lat, y);

        if (rules <= kCap) {
            guard(tag + ".dp_vs_enumeration", [&] {
                const EnumerationResult en = enumerate_stopping_times(lat, y);
                expect(std::abs(snell.v0 - en.value) <= 1e-12,
                       "dp " + fmt_g(snell.v0) + " vs enumeration " +
                           fmt_g(en.value));
                return "value=" + fmt_g(snell.v0);
            });
        } else {
            skip(tag + ".dp_vs_enumeration",
                 std::to_string(rules) + " rules exceed the cap");
        }

        guard(tag + ".doob_meyer", [&] {
            expect(snell.compensator[0] == 0.0 && snell.martingale[0] == 0.0,
                   "root parts must be zero");
            for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
                const double rebuilt =
                    snell.v0 + snell.martingale[i] - snell.compensator[i];
                expect(std::abs(snell.value[i] - rebuilt) <= 1e-12,
                       "node " + std::to_string(i) + " reconstruction off by " +
                           fmt_g(snell.value[i] - rebuilt));
                const auto& n = lat.nodes[i];
                if (n.children.empty()) continue;
                double inc = 0.0;
                for (std::size_t k = 0; k < n.children.size(); ++k) {
                    const int c = n.children[k];
                    inc += n.probs[k] * (snell.martingale[c] - snell.martingale[i]);
                    expect(snell.compensator[c] >= snell.compensator[i] - 1e-12,
                           "compensator decreases into node " + std::to_string(c));
                }
                expect(std::abs(inc) <= 1e-12,
                       "martingale increment mean " + fmt_g(inc) + " at node " +
                           std::to_string(i));
            }
            return std::string{};
        });

        guard(tag + ".pathwise_dual", [&] {
            const PathwiseDualReport rep = pathwise_dual_check(lat, y);
            expect(rep.max_deviation <= 1e-12,
                   "deviation " + fmt_g(rep.max_deviation));
            expect(rep.sup_variance <= 1e-18,
                   "variance " + fmt_g(rep.sup_variance));
            return "v0=" + fmt_g(rep.v0);
        });

        const auto stop_rule = snell_stopping_rule(lat, y, snell);
        const RandomizedKernel snell_kernel = kernel_from_rule(lat, stop_rule);
        const EmpiricalDistribution dist =
            kernel_distribution(lat, y, snell_kernel);

        guard(tag + ".tail_integral", [&] {
            double worst = 0.0;
            for (const auto& spec : specs) {
                for (double x : {-2.5, -0.5, 0.0, 0.75}) {
                    const double direct = expectation_objective(dist, spec, x);
                    const double integral = tail_integral_objective(dist, spec, x);
                    worst = std::max(worst, std::abs(direct - integral));
                }
            }
            expect(worst <= 1e-10, "worst gap " + fmt_g(worst));
            return "worst=" + fmt_g(worst);
        });

        guard(tag + ".mixture", [&] {
            std::vector<char> stop_root(lat.nodes.size(), 0);
            stop_root[0] = 1;
            const RandomizedKernel root_kernel = kernel_from_rule(lat, stop_root);
            const double lambda = 0.375;
            const EmpiricalDistribution mixed = kernel_distribution(
                lat, y, mix_kernels(snell_kernel, root_kernel, lambda));

            const EmpiricalDistribution da = dist;
            const EmpiricalDistribution db =
                kernel_distribution(lat, y, root_kernel);
            std::vector<std::pair<double, double>> pw;
            for (std::size_t i = 0; i < da.points.size(); ++i)
                pw.emplace_back(da.points[i], lambda * da.probs[i]);
            for (std::size_t i = 0; i < db.points.size(); ++i)
                pw.emplace_back(db.points[i], (1.0 - lambda) * db.probs[i]);
            const EmpiricalDistribution manual =
                EmpiricalDistribution::from_weighted(std::move(pw));

            expect(mixed.points == manual.points, "support sets differ");
            for (std::size_t i = 0; i < mixed.probs.size(); ++i)
                expect(std::abs(mixed.probs[i] - manual.probs[i]) <= 1e-15,
                       "mass differs at point " + fmt_g(mixed.points[i]));

            // Affinity of the objective in the kernel, same pair.
            for (const auto& spec : specs)
                for (double x : {-1.25, 0.5}) {
                    const double lhs = kernel_objective(
                        lat, y, mix_kernels(snell_kernel, root_kernel, lambda),
                        spec, x);
                    const double rhs =
                        lambda * kernel_objective(lat, y, snell_kernel, spec, x) +
                        (1.0 - lambda) *
                            kernel_objective(lat, y, root_kernel, spec, x);
                    expect(std::abs(lhs - rhs) <= 1e-10,
                           "objective not affine at x=" + fmt_g(x));
                }
            return std::string{};
        });

        if (rules <= kSmall) {
            for (const auto& spec : specs) {
                if (spec.kind == DivergenceKind::AVaR && spec.param == 1.0)
                    continue;
                const double lo = -(y_max + 1.0);
                const double hi =
                    spec.kind == DivergenceKind::AVaR ? 0.0 : y_max + 1.0;
                const auto grid = linspace(lo, hi, 241);
                guard(tag + ".minimax[" + spec.label() + "]", [&] {
                    const MinimaxReport rep = minimax_check(lat, y, spec, grid);
                    expect(rep.sup_inf_deterministic <=
                               rep.sup_inf_randomized + 1e-8,
                           "deterministic exceeds randomized");
                    expect(rep.sup_inf_randomized <= rep.inf_sup + 1e-6,
                           "randomized exceeds inf-sup");
                    return "inf_sup=" + fmt_g(rep.inf_sup) +
                           " rand=" + fmt_g(rep.sup_inf_randomized) +
                           " det=" + fmt_g(rep.sup_inf_deterministic);
                });
                guard(tag + ".saddle[" + spec.label() + "]", [&] {
                    const SaddleResult s = find_saddle(lat, y, spec, grid);
                    return "x*=" + fmt_g(s.x_star) + " value=" + fmt_g(s.value);
                });
            }
        } else {
            skip(tag + ".minimax", std::to_string(rules) + " rules, too many");
            skip(tag + ".saddle", std::to_string(rules) + " rules, too many");
        }

        guard(tag + ".dyadic_coarsening", [&] {
            const DivergenceSpec spec = DivergenceSpec::avar(0.5);
            std::vector<double> ladder;
            for (int level = 0; level <= 8; ++level) {
                const auto mask = dyadic_exercise_mask(lat, level);
                ladder.push_back(
                    robust_value_masked(lat, y, spec, mask).value);
            }
            for (std::size_t k = 1; k < ladder.size(); ++k)
                expect(ladder[k] >= ladder[k - 1] - 1e-7,
                       "coarse value decreases at level " + std::to_string(k));
            std::vector<char> all_but_root(lat.dates.size(), 1);
            all_but_root[0] = lat.dates.size() == 1 ? 1 : 0;
            const double limit =
                robust_value_masked(lat, y, spec, all_but_root).value;
            expect(std::abs(ladder.back() - limit) <= 1e-7,
                   "ladder tops at " + fmt_g(ladder.back()) + ", limit " +
                       fmt_g(limit));
            const double full = robust_value_lattice(lat, y, spec).value;
            expect(limit <= full + 1e-9, "masked value exceeds the full value");
            return "limit=" + fmt_g(limit) + " full=" + fmt_g(full);
        });
    }
    return oc;
}

}  // namespace riskstop

// SPDX-License-Identifier: MIT
#include "riskstop/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include <Eigen/Dense>

#include "riskstop/optimize.hpp"
#include "riskstop/simplex.hpp"

namespace riskstop {

namespace {

std::uint64_t mul_saturating(std::uint64_t a, std::uint64_t b) {
    constexpr std::uint64_t kCap = 1ULL << 63;
    if (a == 0 || b == 0) return 0;
    if (a >= kCap / b + 1) return kCap;
    const std::uint64_t p = a * b;
    return p >= kCap ? kCap : p;
}

void check_node_index(int i, std::size_t count, const std::string& where) {
    if (i < 0 || static_cast<std::size_t>(i) >= count)
        throw ValidationError(where + ": node index " + std::to_string(i) +
                              " out of range");
}

}  // namespace

void Lattice::validate() const {
    if (nodes.empty()) throw ValidationError("lattice: no nodes");
    if (dates.size() < 1) throw ValidationError("lattice: no dates");
    for (std::size_t j = 1; j < dates.size(); ++j)
        if (!(dates[j] > dates[j - 1]))
            throw ValidationError("lattice: dates must be strictly increasing");
    if (nodes[0].parent != -1 || nodes[0].level != 0)
        throw ValidationError("lattice: node 0 must be the root");
    const int J = depth();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const std::string tag = "lattice node " + std::to_string(i);
        if (i > 0) {
            if (n.parent < 0 || static_cast<std::size_t>(n.parent) >= i)
                throw ValidationError(tag + ": parent must precede the node");
            if (n.level != nodes[n.parent].level + 1)
                throw ValidationError(tag + ": level must be parent level + 1");
        }
        if (!(n.payoff >= 0.0) || !std::isfinite(n.payoff))
            throw ValidationError(tag + ": payoff must be finite and nonnegative");
        if (n.children.size() != n.probs.size())
            throw ValidationError(tag + ": children/probs size mismatch");
        if (n.children.empty()) {
            if (n.level != J)
                throw ValidationError(tag + ": leaf before the final level");
            continue;
        }
        if (n.level >= J)
            throw ValidationError(tag + ": children beyond the final level");
        double sum = 0.0;
        for (std::size_t k = 0; k < n.children.size(); ++k) {
            const int c = n.children[k];
            check_node_index(c, nodes.size(), tag);
            if (nodes[c].parent != static_cast<int>(i))
                throw ValidationError(tag + ": child " + std::to_string(c) +
                                      " does not point back");
            if (!(n.probs[k] > 0.0))
                throw ValidationError(tag + ": transition probabilities must be "
                                      "strictly positive");
            sum += n.probs[k];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError(tag + ": probabilities sum to " +
                                  std::to_string(sum));
    }
}

std::vector<double> Lattice::payoffs() const {
    std::vector<double> y(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) y[i] = nodes[i].payoff;
    return y;
}

namespace {

struct BinomialFactors {
    double u, d, q, dt;
};

BinomialFactors binomial_factors(const GbmParams& params, const ExerciseGrid& grid) {
    params.validate();
    grid.validate();
    if (params.d != 1)
        throw ValidationError("binomial: single-asset models only");
    if (!(params.sigma > 0.0))
        throw ValidationError("binomial: sigma must be positive");
    const int J = grid.steps();
    const double dt = grid.maturity() / J;
    for (int j = 0; j < J; ++j)
        if (std::abs((grid.dates[j + 1] - grid.dates[j]) - dt) > 1e-12 * grid.maturity())
            throw ValidationError("binomial: grid must be equidistant");
    BinomialFactors f;
    f.dt = dt;
    f.u = std::exp(params.sigma * std::sqrt(dt));
    f.d = 1.0 / f.u;
    f.q = (std::exp((params.r - params.delta) * dt) - f.d) / (f.u - f.d);
    if (!(f.q > 0.0 && f.q < 1.0))
        throw ValidationError("binomial: drift-matched probability " +
                              std::to_string(f.q) + " outside (0,1)");
    return f;
}

}  // namespace

Lattice Lattice::binomial(const GbmParams& params, const ExerciseGrid& grid,
                          const PayoffSpec& payoff) {
    payoff.validate();
    const BinomialFactors f = binomial_factors(params, grid);
    const int J = grid.steps();
    if (J > 20) throw ValidationError("binomial: more than 20 periods");

    Lattice lat;
    lat.dates = grid.dates;
    lat.nodes.reserve((std::size_t{2} << J) - 1);
    auto add_node = [&](int parent, int level, double state) {
        LatticeNode n;
        n.parent = parent;
        n.level = level;
        n.state = state;
        const double intrinsic = state - payoff.strike;
        n.payoff = intrinsic > 0.0
                       ? std::exp(-params.r * grid.dates[level]) * intrinsic
                       : 0.0;
        lat.nodes.push_back(std::move(n));
        return static_cast<int>(lat.nodes.size()) - 1;
    };
    add_node(-1, 0, params.s0);
    // Non-recombining: each node owns its children, so every root-to-leaf
    // path is a distinct node sequence and the Doob-Meyer parts are plain
    // per-node values.
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        if (lat.nodes[i].level == J) continue;
        const double s = lat.nodes[i].state;
        const int lvl = lat.nodes[i].level;
        const int up = add_node(static_cast<int>(i), lvl + 1, s * f.u);
        const int dn = add_node(static_cast<int>(i), lvl + 1, s * f.d);
        lat.nodes[i].children = {up, dn};
        lat.nodes[i].probs = {f.q, 1.0 - f.q};
    }
    lat.validate();
    return lat;
}

Lattice lattice_from_json(const nlohmann::json& doc) {
    Lattice lat;
    try {
        if (!doc.contains("nodes") || !doc["nodes"].is_array())
            throw ValidationError("fixture: missing nodes array");
        if (doc.contains("dates")) {
            for (const auto& d : doc["dates"]) lat.dates.push_back(d.get<double>());
        }
        const auto& arr = doc["nodes"];
        lat.nodes.resize(arr.size());
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& jn = arr[i];
            auto& n = lat.nodes[i];
            const std::string tag = "fixture node " + std::to_string(i);
            if (!jn.contains("payoff"))
                throw ValidationError(tag + ": missing payoff");
            n.payoff = jn["payoff"].get<double>();
            n.state = jn.value("state", 0.0);
            if (jn.contains("children")) {
                for (const auto& c : jn["children"]) {
                    const int ci = c.get<int>();
                    check_node_index(ci, arr.size(), tag);
                    n.children.push_back(ci);
                }
                if (!jn.contains("probs") || jn["probs"].size() != n.children.size())
                    throw ValidationError(tag + ": probs must match children");
                for (const auto& p : jn["probs"]) n.probs.push_back(p.get<double>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("fixture: ") + e.what());
    }
    // Derive parents and levels from the children lists.
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        for (int c : lat.nodes[i].children) {
            if (lat.nodes[c].parent != -1)
                throw ValidationError("fixture node " + std::to_string(c) +
                                      ": multiple parents");
            lat.nodes[c].parent = static_cast<int>(i);
            lat.nodes[c].level = lat.nodes[i].level + 1;
        }
    }
    int max_level = 0;
    for (const auto& n : lat.nodes) max_level = std::max(max_level, n.level);
    if (lat.dates.empty()) {
        lat.dates.resize(max_level + 1);
        for (int j = 0; j <= max_level; ++j) lat.dates[j] = j;
    }
    if (static_cast<int>(lat.dates.size()) != max_level + 1)
        throw ValidationError("fixture: dates size must be depth + 1");
    lat.validate();
    return lat;
}

nlohmann::json lattice_to_json(const Lattice& lat) {
    nlohmann::json doc;
    doc["dates"] = lat.dates;
    auto& arr = doc["nodes"] = nlohmann::json::array();
    for (const auto& n : lat.nodes) {
        nlohmann::json jn;
        jn["payoff"] = n.payoff;
        if (n.state != 0.0) jn["state"] = n.state;
        if (!n.children.empty()) {
            jn["children"] = n.children;
            jn["probs"] = n.probs;
        }
        arr.push_back(std::move(jn));
    }
    return doc;
}

Lattice random_tree(std::uint64_t seed, int max_periods, int max_branch,
                    std::uint64_t rule_cap) {
    if (max_periods < 1 || max_branch < 1)
        throw ValidationError("random_tree: bad shape limits");
    std::mt19937_64 eng(detail::splitmix64(seed ^ 0xa5e3d2c1b4f60718ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int periods = 1 + static_cast<int>(eng() % max_periods);
        Lattice lat;
        lat.dates.resize(periods + 1);
        for (int j = 0; j <= periods; ++j) lat.dates[j] = j;
        lat.nodes.emplace_back();
        lat.nodes[0].payoff = 10.0 * unif(eng);
        bool too_big = false;
        for (std::size_t i = 0; i < lat.nodes.size() && !too_big; ++i) {
            if (lat.nodes[i].level == periods) continue;
            const int k = 1 + static_cast<int>(eng() % max_branch);
            double total = 0.0;
            for (int c = 0; c < k; ++c) {
                LatticeNode child;
                child.parent = static_cast<int>(i);
                child.level = lat.nodes[i].level + 1;
                child.payoff = 10.0 * unif(eng);
                lat.nodes.push_back(std::move(child));
                lat.nodes[i].children.push_back(
                    static_cast<int>(lat.nodes.size()) - 1);
                // Keep probabilities away from zero so no branch degenerates.
                const double w = 0.1 + unif(eng);
                lat.nodes[i].probs.push_back(w);
                total += w;
                if (lat.nodes.size() > 5000) {
                    too_big = true;
                    break;
                }
            }
            for (auto& p : lat.nodes[i].probs) p /= total;
        }
        if (too_big) continue;
        if (rule_count(lat) > rule_cap) continue;
        lat.validate();
        return lat;
    }
    throw NumericError("random_tree: could not sample a tree under the caps");
}

std::vector<double> reach_probabilities(const Lattice& lat) {
    std::vector<double> reach(lat.nodes.size(), 0.0);
    reach[0] = 1.0;
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        const auto& n = lat.nodes[i];
        for (std::size_t k = 0; k < n.children.size(); ++k)
            reach[n.children[k]] = reach[i] * n.probs[k];
    }
    return reach;
}

std::uint64_t rule_count(const Lattice& lat) {
    std::vector<std::uint64_t> count(lat.nodes.size(), 1);
    for (std::size_t i = lat.nodes.size(); i-- > 0;) {
        const auto& n = lat.nodes[i];
        if (n.children.empty()) continue;
        std::uint64_t prod = 1;
        for (int c : n.children) prod = mul_saturating(prod, count[c]);
        count[i] = prod >= (1ULL << 63) ? prod : prod + 1;
    }
    return count[0];
}

void for_each_leaf_path(
    const Lattice& lat,
    const std::function<void(const std::vector<int>&, double)>& fn) {
    std::vector<int> path{0};
    std::vector<double> prob{1.0};
    // Explicit DFS; (node, child slot) pairs.
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto& [node, slot] = stack.back();
        const auto& n = lat.nodes[node];
        if (n.children.empty()) {
            fn(path, prob.back());
            stack.pop_back();
            path.pop_back();
            prob.pop_back();
            continue;
        }
        if (slot == n.children.size()) {
            stack.pop_back();
            path.pop_back();
            prob.pop_back();
            continue;
        }
        const int child = n.children[slot];
        const double p = prob.back() * n.probs[slot];
        ++slot;
        stack.emplace_back(child, 0);
        path.push_back(child);
        prob.push_back(p);
    }
}

SnellResult snell_envelope(const Lattice& lat, std::span<const double> z) {
    if (z.size() != lat.nodes.size())
        throw ValidationError("snell_envelope: payoff size mismatch");
    SnellResult res;
    const std::size_t n = lat.nodes.size();
    res.value.resize(n);
    res.continuation.resize(n);
    res.martingale.assign(n, 0.0);
    res.compensator.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        const auto& node = lat.nodes[i];
        if (node.children.empty()) {
            res.value[i] = z[i];
            res.continuation[i] = z[i];
            continue;
        }
        double cont = 0.0;
        for (std::size_t k = 0; k < node.children.size(); ++k)
            cont += node.probs[k] * res.value[node.children[k]];
        res.continuation[i] = cont;
        res.value[i] = std::max(z[i], cont);
    }
    // Cumulative Doob-Meyer parts along each unique root path: martingale
    // increment V(child) - E[V | parent], predictable increment
    // V(parent) - E[V | parent] >= 0.
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = lat.nodes[i];
        for (int c : node.children) {
            res.martingale[c] =
                res.martingale[i] + (res.value[c] - res.continuation[i]);
            res.compensator[c] =
                res.compensator[i] + (res.value[i] - res.continuation[i]);
        }
    }
    res.v0 = res.value[0];
    return res;
}

std::vector<char> snell_stopping_rule(const Lattice& lat,
                                      std::span<const double> z,
                                      const SnellResult& snell) {
    std::vector<char> stop(lat.nodes.size(), 0);
    for (std::size_t i = 0; i < lat.nodes.size(); ++i)
        stop[i] = lat.is_leaf(static_cast<int>(i)) || z[i] >= snell.continuation[i];
    return stop;
}

namespace {

std::vector<std::uint64_t> exact_rule_counts(const Lattice& lat) {
    std::vector<std::uint64_t> count(lat.nodes.size(), 1);
    for (std::size_t i = lat.nodes.size(); i-- > 0;) {
        const auto& n = lat.nodes[i];
        if (n.children.empty()) continue;
        std::uint64_t prod = 1;
        for (int c : n.children) prod = mul_saturating(prod, count[c]);
        count[i] = prod + 1;
    }
    return count;
}

// Writes the first-stop flags of rule `index` at `node` (mixed-radix over
// the children, last child fastest, 0 = stop here).
void decode_rule(const Lattice& lat, const std::vector<std::uint64_t>& count,
                 int node, std::uint64_t index, std::vector<char>& stop) {
    if (index == 0 || lat.is_leaf(node)) {
        stop[node] = 1;
        return;
    }
    std::uint64_t m = index - 1;
    const auto& children = lat.nodes[node].children;
    for (std::size_t k = children.size(); k-- > 0;) {
        const int c = children[k];
        decode_rule(lat, count, c, m % count[c], stop);
        m /= count[c];
    }
}

}  // namespace

EnumerationResult enumerate_stopping_times(const Lattice& lat,
                                           std::span<const double> z,
                                           std::uint64_t cap) {
    if (z.size() != lat.nodes.size())
        throw ValidationError("enumerate_stopping_times: payoff size mismatch");
    const std::uint64_t total = rule_count(lat);
    if (total > cap)
        throw NumericError("enumerate_stopping_times: " + std::to_string(total) +
                           " rules exceed the cap of " + std::to_string(cap));

    // Per-node list of E[z_tau | node] over all sub-rules, built by
    // cartesian products; entry 0 is "stop here".
    std::vector<std::vector<double>> vals(lat.nodes.size());
    for (std::size_t i = lat.nodes.size(); i-- > 0;) {
        const auto& n = lat.nodes[i];
        auto& out = vals[i];
        if (n.children.empty()) {
            out = {z[i]};
            continue;
        }
        std::size_t combos = 1;
        for (int c : n.children) combos *= vals[c].size();
        out.reserve(combos + 1);
        out.push_back(z[i]);
        for (std::size_t m = 0; m < combos; ++m) {
            std::size_t rest = m;
            double v = 0.0;
            for (std::size_t k = n.children.size(); k-- > 0;) {
                const auto& cv = vals[n.children[k]];
                v += n.probs[k] * cv[rest % cv.size()];
                rest /= cv.size();
            }
            out.push_back(v);
        }
        for (int c : n.children) {
            vals[c].clear();
            vals[c].shrink_to_fit();
        }
    }

    const auto& root = vals[0];
    std::size_t best = 0;
    for (std::size_t r = 1; r < root.size(); ++r)
        if (root[r] > root[best]) best = r;

    EnumerationResult res;
    res.value = root[best];
    res.rule.assign(lat.nodes.size(), 0);
    decode_rule(lat, exact_rule_counts(lat), 0, best, res.rule);
    return res;
}

double rule_value(const Lattice& lat, std::span<const double> z,
                  std::span<const char> stop) {
    double acc = 0.0;
    std::vector<std::pair<int, double>> stack{{0, 1.0}};
    while (!stack.empty()) {
        const auto [node, p] = stack.back();
        stack.pop_back();
        if (stop[node] || lat.is_leaf(node)) {
            acc += p * z[node];
            continue;
        }
        const auto& n = lat.nodes[node];
        for (std::size_t k = 0; k < n.children.size(); ++k)
            stack.emplace_back(n.children[k], p * n.probs[k]);
    }
    return acc;
}

void for_each_rule(const Lattice& lat, std::uint64_t cap,
                   const std::function<void(const std::vector<char>&)>& fn) {
    const std::uint64_t total = rule_count(lat);
    if (total > cap)
        throw NumericError("for_each_rule: " + std::to_string(total) +
                           " rules exceed the cap of " + std::to_string(cap));
    const auto count = exact_rule_counts(lat);
    std::vector<char> stop(lat.nodes.size());
    for (std::uint64_t r = 0; r < total; ++r) {
        std::fill(stop.begin(), stop.end(), 0);
        decode_rule(lat, count, 0, r, stop);
        fn(stop);
    }
}

PathwiseDualReport pathwise_dual_check(const Lattice& lat,
                                       std::span<const double> z) {
    const SnellResult snell = snell_envelope(lat, z);
    PathwiseDualReport rep;
    rep.v0 = snell.v0;
    // Center the suprema at v0 before accumulating: the moments of values
    // near 8 computed uncentered lose ~1e-14 to cancellation, drowning the
    // 1e-18-scale variance this check is after.
    double mean_c = 0.0, second_c = 0.0;
    for_each_leaf_path(lat, [&](const std::vector<int>& path, double prob) {
        double sup = -std::numeric_limits<double>::infinity();
        for (int node : path)
            sup = std::max(sup, z[node] - snell.martingale[node]);
        const double dev = sup - snell.v0;
        rep.max_deviation = std::max(rep.max_deviation, std::abs(dev));
        mean_c += prob * dev;
        second_c += prob * dev * dev;
    });
    rep.sup_mean = snell.v0 + mean_c;
    rep.sup_variance = std::max(0.0, second_c - mean_c * mean_c);
    return rep;
}

namespace {

void reject_flat_avar(const DivergenceSpec& spec, const std::string& where) {
    if (spec.kind == DivergenceKind::AVaR && spec.param == 1.0)
        throw ValidationError(where +
                              ": avar at level 1 has a flat shift objective; "
                              "use the risk-neutral kind instead");
}

MinimizeOptions search_options(const DivergenceSpec& spec,
                               const ShiftSearchConfig& cfg) {
    MinimizeOptions opt;
    opt.x_tol = cfg.x_tolerance;
    opt.grow_factor = cfg.bracket_expansion_factor;
    opt.max_grow_iter = cfg.max_iterations;
    if (cfg.upper_cap_at_zero && spec.kind == DivergenceKind::AVaR)
        opt.hard_hi = 0.0;
    return opt;
}

}  // namespace

RobustLatticeResult robust_value_lattice(const Lattice& lat,
                                         std::span<const double> y,
                                         const DivergenceSpec& spec,
                                         const ShiftSearchConfig& cfg) {
    spec.validate();
    cfg.validate();
    reject_flat_avar(spec, "robust_value_lattice");
    if (y.size() != lat.nodes.size())
        throw ValidationError("robust_value_lattice: payoff size mismatch");
    if (spec.mean_like())
        return {snell_envelope(lat, y).v0, 0.0};

    double abs_max = 0.0;
    for (double v : y) abs_max = std::max(abs_max, std::abs(v));
    const MinimizeOptions opt = search_options(spec, cfg);
    std::vector<double> z(y.size());
    auto objective = [&](double x) {
        for (std::size_t i = 0; i < y.size(); ++i)
            z[i] = phi_star(spec, x + y[i]) - x;
        return snell_envelope(lat, z).v0;
    };
    const double hi = std::min(abs_max + 1.0, opt.hard_hi);
    const MinimizeResult r =
        minimize_convex(objective, std::min(-(abs_max + 1.0), hi - 1e-6), hi, opt);
    return {r.value, r.x};
}

double snell_value_masked(const Lattice& lat, std::span<const double> z,
                          std::span<const char> level_mask) {
    if (level_mask.size() != lat.dates.size())
        throw ValidationError("snell_value_masked: mask size mismatch");
    std::vector<double> value(lat.nodes.size());
    for (std::size_t i = lat.nodes.size(); i-- > 0;) {
        const auto& n = lat.nodes[i];
        if (n.children.empty()) {
            value[i] = z[i];  // forced stop at the horizon
            continue;
        }
        double cont = 0.0;
        for (std::size_t k = 0; k < n.children.size(); ++k)
            cont += n.probs[k] * value[n.children[k]];
        value[i] = level_mask[n.level] ? std::max(z[i], cont) : cont;
    }
    return value[0];
}

RobustLatticeResult robust_value_masked(const Lattice& lat,
                                        std::span<const double> y,
                                        const DivergenceSpec& spec,
                                        std::span<const char> level_mask,
                                        const ShiftSearchConfig& cfg) {
    spec.validate();
    cfg.validate();
    reject_flat_avar(spec, "robust_value_masked");
    std::vector<char> mask(level_mask.begin(), level_mask.end());
    if (spec.mean_like()) {
        std::vector<double> z(y.begin(), y.end());
        return {snell_value_masked(lat, z, mask), 0.0};
    }
    double abs_max = 0.0;
    for (double v : y) abs_max = std::max(abs_max, std::abs(v));
    const MinimizeOptions opt = search_options(spec, cfg);
    std::vector<double> z(y.size());
    auto objective = [&](double x) {
        for (std::size_t i = 0; i < y.size(); ++i)
            z[i] = phi_star(spec, x + y[i]) - x;
        return snell_value_masked(lat, z, mask);
    };
    const double hi = std::min(abs_max + 1.0, opt.hard_hi);
    const MinimizeResult r =
        minimize_convex(objective, std::min(-(abs_max + 1.0), hi - 1e-6), hi, opt);
    return {r.value, r.x};
}

void RandomizedKernel::validate(const Lattice& lat) const {
    if (mass.size() != lat.nodes.size())
        throw ValidationError("kernel: mass size mismatch");
    for (double w : mass)
        if (!(w >= -1e-9) || !std::isfinite(w))
            throw ValidationError("kernel: masses must be nonnegative");
    for_each_leaf_path(lat, [&](const std::vector<int>& path, double) {
        double sum = 0.0;
        for (int node : path) sum += mass[node];
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("kernel: path mass sums to " +
                                  std::to_string(sum));
    });
}

RandomizedKernel kernel_from_rule(const Lattice& lat,
                                  std::span<const char> stop) {
    RandomizedKernel k;
    k.mass.assign(lat.nodes.size(), 0.0);
    // DFS skipping subtrees under a stop: mass 1 on each first stop.
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (stop[node] || lat.is_leaf(node)) {
            k.mass[node] = 1.0;
            continue;
        }
        for (int c : lat.nodes[node].children) stack.push_back(c);
    }
    return k;
}

RandomizedKernel mix_kernels(const RandomizedKernel& a, const RandomizedKernel& b,
                             double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ValidationError("mix_kernels: lambda must be in [0,1]");
    if (a.mass.size() != b.mass.size())
        throw ValidationError("mix_kernels: size mismatch");
    RandomizedKernel out;
    out.mass.resize(a.mass.size());
    for (std::size_t i = 0; i < a.mass.size(); ++i)
        out.mass[i] = lambda * a.mass[i] + (1.0 - lambda) * b.mass[i];
    return out;
}

void EmpiricalDistribution::validate() const {
    if (points.size() != probs.size() || points.empty())
        throw ValidationError("distribution: empty or mismatched");
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i]))
            throw ValidationError("distribution: non-finite support point");
        if (!(probs[i] > 0.0))
            throw ValidationError("distribution: probabilities must be positive");
        if (i > 0 && !(points[i] > points[i - 1]))
            throw ValidationError("distribution: support must be sorted");
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("distribution: probabilities sum to " +
                              std::to_string(sum));
}

EmpiricalDistribution EmpiricalDistribution::from_weighted(
    std::vector<std::pair<double, double>> point_weight) {
    std::erase_if(point_weight, [](const auto& pw) { return pw.second <= 0.0; });
    std::sort(point_weight.begin(), point_weight.end());
    EmpiricalDistribution dist;
    for (const auto& [p, w] : point_weight) {
        if (!dist.points.empty() && p == dist.points.back())
            dist.probs.back() += w;
        else {
            dist.points.push_back(p);
            dist.probs.push_back(w);
        }
    }
    return dist;
}

EmpiricalDistribution kernel_distribution(const Lattice& lat,
                                          std::span<const double> y,
                                          const RandomizedKernel& kernel) {
    kernel.validate(lat);
    if (y.size() != lat.nodes.size())
        throw ValidationError("kernel_distribution: payoff size mismatch");
    const auto reach = reach_probabilities(lat);
    std::vector<std::pair<double, double>> pw;
    pw.reserve(lat.nodes.size());
    for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
        const double w = reach[i] * kernel.mass[i];
        if (w > 0.0) pw.emplace_back(y[i], w);
    }
    return EmpiricalDistribution::from_weighted(std::move(pw));
}

double expectation_objective(const EmpiricalDistribution& dist,
                             const DivergenceSpec& spec, double x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.points.size(); ++i)
        acc += dist.probs[i] * phi_star(spec, x + dist.points[i]);
    return acc - x;
}

double tail_integral_objective(const EmpiricalDistribution& dist,
                               const DivergenceSpec& spec, double x) {
    dist.validate();
    if (dist.points.front() < 0.0)
        throw ValidationError("tail_integral_objective: negative support");
    double acc = phi_star(spec, x) - x;
    double prev = 0.0;
    double survival = 1.0;
    std::size_t i = 0;
    if (dist.points[0] == 0.0) {
        survival -= dist.probs[0];
        i = 1;
    }
    // On [prev, point_i) the survival P(Y > z) is constant, and the exact
    // antiderivative of phi_star' is phi_star itself.
    for (; i < dist.points.size(); ++i) {
        const double p = dist.points[i];
        acc += survival * (phi_star(spec, x + p) - phi_star(spec, x + prev));
        survival -= dist.probs[i];
        prev = p;
    }
    return acc;
}

OceResult distribution_oce(const EmpiricalDistribution& dist,
                           const DivergenceSpec& spec,
                           const ShiftSearchConfig& cfg) {
    spec.validate();
    cfg.validate();
    dist.validate();
    if (spec.mean_like()) {
        double mean = 0.0;
        for (std::size_t i = 0; i < dist.points.size(); ++i)
            mean += dist.probs[i] * dist.points[i];
        return {mean, std::max(0.0, -dist.points.front()), 0};
    }
    double abs_max = 0.0;
    for (double p : dist.points) abs_max = std::max(abs_max, std::abs(p));
    const MinimizeOptions opt = search_options(spec, cfg);
    auto objective = [&](double x) { return expectation_objective(dist, spec, x); };
    const double hi = std::min(abs_max + 1.0, opt.hard_hi);
    const MinimizeResult r =
        minimize_convex(objective, std::min(-(abs_max + 1.0), hi - 1e-6), hi, opt);
    return {r.value, r.x, r.evaluations};
}

double kernel_objective(const Lattice& lat, std::span<const double> y,
                        const RandomizedKernel& kernel, const DivergenceSpec& spec,
                        double x) {
    const auto reach = reach_probabilities(lat);
    double acc = 0.0;
    for (std::size_t i = 0; i < lat.nodes.size(); ++i)
        if (kernel.mass[i] != 0.0)
            acc += reach[i] * kernel.mass[i] * phi_star(spec, x + y[i]);
    return acc - x;
}

namespace {

struct CuttingPlaneResult {
    double value = 0.0;  // sup over kernels of inf over x
    RandomizedKernel kernel;
    int cuts = 0;
};

// Maximizes min_x h(w, x) over the kernel polytope on the x-domain
// [lo, hi]. h is affine in w, so for a finite cut set the inner min is an
// LP; new cuts come from exact 1-D minimization at the current kernel.
CuttingPlaneResult maximize_kernel_value(const Lattice& lat,
                                         std::span<const double> y,
                                         const DivergenceSpec& spec, double lo,
                                         double hi) {
    const std::size_t n = lat.nodes.size();
    const auto reach = reach_probabilities(lat);

    std::vector<std::vector<int>> paths;
    for_each_leaf_path(lat, [&](const std::vector<int>& path, double) {
        paths.push_back(path);
    });
    const std::size_t m = paths.size();

    std::vector<double> cuts{lo, 0.5 * (lo + hi), hi};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    CuttingPlaneResult best;
    best.value = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    MinimizeOptions inner_opt;
    inner_opt.x_tol = 1e-11;
    inner_opt.hard_lo = lo;
    inner_opt.hard_hi = hi;

    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t k = cuts.size();
        // Columns: w (n), t+, t-, slack per cut (k).
        const std::size_t cols = n + 2 + k;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + k, cols);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m + k);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(cols);
        c(n) = -1.0;  // max t == min -t+ + t-
        c(n + 1) = 1.0;
        for (std::size_t r = 0; r < m; ++r) {
            for (int node : paths[r]) A(r, node) = 1.0;
            b(r) = 1.0;
        }
        for (std::size_t i = 0; i < k; ++i) {
            // t <= sum_node reach w phi_star(x_i + y) - x_i
            for (std::size_t node = 0; node < n; ++node)
                A(m + i, node) = reach[node] * phi_star(spec, cuts[i] + y[node]);
            A(m + i, n) = -1.0;
            A(m + i, n + 1) = 1.0;
            A(m + i, n + 2 + i) = -1.0;
            b(m + i) = cuts[i];
        }
        const LpResult lp = solve_lp(A, b, c);
        if (lp.status != LpStatus::Optimal)
            throw NumericError("minimax: kernel LP failed (status " +
                               std::to_string(static_cast<int>(lp.status)) + ")");
        upper = std::min(upper, -lp.objective);

        RandomizedKernel w;
        w.mass.resize(n);
        for (std::size_t i = 0; i < n; ++i) w.mass[i] = std::max(0.0, lp.x(i));

        auto h = [&](double x) { return kernel_objective(lat, y, w, spec, x); };
        const MinimizeResult sep = minimize_convex(h, lo, hi, inner_opt);
        if (sep.value > best.value) {
            best.value = sep.value;
            best.kernel = w;
        }
        best.cuts = static_cast<int>(cuts.size());
        if (upper - best.value <= 1e-10) break;

        bool fresh = true;
        for (double xc : cuts)
            if (std::abs(xc - sep.x) < 1e-13) fresh = false;
        if (fresh) {
            cuts.push_back(sep.x);
        } else {
            // Separation landed on a known cut while the gap is still open.
            // Bisect the widest interval between cuts so the piecewise-linear
            // upper model keeps tightening instead of stalling.
            std::size_t widest = 0;
            for (std::size_t i = 1; i + 1 < cuts.size(); ++i)
                if (cuts[i + 1] - cuts[i] > cuts[widest + 1] - cuts[widest])
                    widest = i;
            const double mid = 0.5 * (cuts[widest] + cuts[widest + 1]);
            if (cuts[widest + 1] - cuts[widest] < 1e-12) break;
            cuts.push_back(mid);
        }
        std::sort(cuts.begin(), cuts.end());
    }
    return best;
}

}  // namespace

MinimaxReport minimax_check(const Lattice& lat, std::span<const double> y,
                            const DivergenceSpec& spec,
                            std::span<const double> x_grid,
                            const ShiftSearchConfig& cfg, double assert_tol,
                            std::uint64_t cap) {
    spec.validate();
    cfg.validate();
    reject_flat_avar(spec, "minimax_check");
    if (x_grid.size() < 2 || !std::is_sorted(x_grid.begin(), x_grid.end()))
        throw ValidationError("minimax_check: x_grid must be sorted, size >= 2");
    if (y.size() != lat.nodes.size())
        throw ValidationError("minimax_check: payoff size mismatch");
    const double lo = x_grid.front(), hi = x_grid.back();

    MinimaxReport rep;
    if (spec.mean_like()) {
        // Flat shift: the game value is the plain Snell value, attained by
        // a pure rule, so all three quantities coincide.
        const SnellResult sn = snell_envelope(lat, y);
        rep.inf_sup = sn.v0;
        rep.x_at_inf_sup = 0.0;
        rep.sup_inf_randomized = sn.v0;
        rep.best_rule = snell_stopping_rule(lat, y, sn);
        rep.kernel = kernel_from_rule(lat, rep.best_rule);
        rep.sup_inf_deterministic = sn.v0;
        return rep;
    }

    // inf over x of the exact DP value.
    std::vector<double> z(y.size());
    auto g = [&](double x) {
        for (std::size_t i = 0; i < y.size(); ++i)
            z[i] = phi_star(spec, x + y[i]) - x;
        return snell_envelope(lat, z).v0;
    };
    MinimizeOptions opt;
    opt.x_tol = std::min(cfg.x_tolerance, 1e-10);
    opt.hard_lo = lo;
    opt.hard_hi = hi;
    const MinimizeResult infsup = minimize_convex(g, lo, hi, opt);
    rep.inf_sup = infsup.value;
    rep.x_at_inf_sup = infsup.x;

    if (spec.kind == DivergenceKind::Entropic) {
        // The shift factors out of the exponential conjugate:
        //   E[phi_star(x + Y)] - x = (e^{gamma x} E[e^{gamma Y}] - 1)/gamma - x,
        // so every kernel shares the same shape in x and the sup over kernels
        // collapses to one Snell problem on e^{gamma y}, attained by a pure
        // rule. Solving it exactly sidesteps the cutting-plane LP, whose
        // tableau becomes unusable once the conjugate spans dozens of orders
        // of magnitude (large payoffs do that). Payoffs are recentred at
        // y_max before exponentiating so the DP runs on values in (0, 1].
        const double gamma = spec.param;
        double y_max = 0.0;
        for (double v : y) y_max = std::max(y_max, v);
        std::vector<double> ez(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            ez[i] = std::exp(gamma * (y[i] - y_max));
        const SnellResult sn = snell_envelope(lat, ez);
        const double log_s = gamma * y_max + std::log(sn.v0);
        const double x_hat = std::clamp(-log_s / gamma, lo, hi);
        rep.sup_inf_randomized =
            std::expm1(gamma * x_hat + log_s) / gamma - x_hat;
        rep.best_rule = snell_stopping_rule(lat, ez, sn);
        rep.kernel = kernel_from_rule(lat, rep.best_rule);
        rep.cuts = 0;
    } else {
        const CuttingPlaneResult cp = maximize_kernel_value(lat, y, spec, lo, hi);
        rep.sup_inf_randomized = cp.value;
        rep.kernel = cp.kernel;
        rep.cuts = cp.cuts;
    }

    // Brute force over pure rules; may sit strictly below on atomful trees.
    double det = -std::numeric_limits<double>::infinity();
    MinimizeOptions det_opt;
    det_opt.x_tol = 1e-10;
    det_opt.hard_lo = lo;
    det_opt.hard_hi = hi;
    for_each_rule(lat, cap, [&](const std::vector<char>& stop) {
        const auto dist = kernel_distribution(lat, y, kernel_from_rule(lat, stop));
        auto f = [&](double x) { return expectation_objective(dist, spec, x); };
        const MinimizeResult r = minimize_convex(f, lo, hi, det_opt);
        if (r.value > det) {
            det = r.value;
            rep.best_rule = stop;
        }
    });
    rep.sup_inf_deterministic = det;

    if (std::abs(rep.inf_sup - rep.sup_inf_randomized) > assert_tol)
        throw NumericError(
            "minimax_check: randomized lower value " +
            std::to_string(rep.sup_inf_randomized) + " vs min-max value " +
            std::to_string(rep.inf_sup) + " differ beyond tolerance");
    return rep;
}

SaddleResult find_saddle(const Lattice& lat, std::span<const double> y,
                         const DivergenceSpec& spec,
                         std::span<const double> x_grid,
                         const ShiftSearchConfig& cfg, double tolerance,
                         std::uint64_t cap) {
    const MinimaxReport rep = minimax_check(lat, y, spec, x_grid, cfg, 1e-6, cap);
    SaddleResult res;
    res.x_star = rep.x_at_inf_sup;
    res.kernel = rep.kernel;
    res.value = kernel_objective(lat, y, res.kernel, spec, res.x_star);

    double left = 0.0;
    for_each_rule(lat, cap, [&](const std::vector<char>& stop) {
        const double h =
            kernel_objective(lat, y, kernel_from_rule(lat, stop), spec, res.x_star);
        left = std::max(left, h - res.value);
    });
    double right = 0.0;
    for (double x : x_grid) {
        const double h = kernel_objective(lat, y, res.kernel, spec, x);
        right = std::max(right, res.value - h);
    }
    res.left_violation = left;
    res.right_violation = right;
    if (left > tolerance || right > tolerance)
        throw NumericError("find_saddle: saddle inequalities violated by " +
                           std::to_string(std::max(left, right)) +
                           " (tolerance " + std::to_string(tolerance) + ")");
    return res;
}

std::vector<char> dyadic_exercise_mask(const Lattice& lat, int level) {
    if (level < 0) throw ValidationError("dyadic mask: level must be >= 0");
    std::vector<char> mask(lat.dates.size(), 0);
    for (std::size_t j = 0; j < lat.dates.size(); ++j) {
        const double t = lat.dates[j];
        if (t <= 0.0) continue;
        const double scaled = std::ldexp(t, level);
        mask[j] = std::abs(scaled - std::nearbyint(scaled)) < 1e-9;
    }
    mask.back() = 1;  // stopping is capped at the horizon
    return mask;
}

std::vector<char> coarsen_stopping_rule(const Lattice& lat,
                                        std::span<const char> stop, int level) {
    const auto mask = dyadic_exercise_mask(lat, level);
    std::vector<char> out(lat.nodes.size(), 0);
    // Carry a "stop requested" flag down each path; it lands on the first
    // masked level at or after the original stop.
    std::vector<std::pair<int, bool>> stack{{0, false}};
    while (!stack.empty()) {
        const auto [node, pending_in] = stack.back();
        stack.pop_back();
        const bool pending = pending_in || stop[node];
        if (pending && (mask[lat.nodes[node].level] || lat.is_leaf(node))) {
            out[node] = 1;
            continue;
        }
        for (int c : lat.nodes[node].children) stack.emplace_back(c, pending);
    }
    return out;
}

BinomialModel::BinomialModel(GbmParams params, ExerciseGrid grid)
    : params_(params), grid_(std::move(grid)) {
    const BinomialFactors f = binomial_factors(params_, grid_);
    u_ = f.u;
    d_ = f.d;
    q_ = f.q;
}

void BinomialModel::initial_state(std::span<double> out) const {
    out[0] = params_.s0;
}

void BinomialModel::step(std::span<double> state, int /*from_date*/,
                         SubstreamRng& rng) const {
    state[0] *= rng.uniform() < q_ ? u_ : d_;
}

}  // namespace riskstop

// SPDX-License-Identifier: MIT
#include "riskstop/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskstop/errors.hpp"
#include "riskstop/parallel.hpp"
#include "riskstop/rng.hpp"

namespace riskstop {

void DualConfig::validate() const {
    if (n_inner < 1) throw ValidationError("dual: n_inner must be >= 1");
    if (n_outer < 2) throw ValidationError("dual: n_outer must be >= 2");
}

namespace {

// Discounted max-call payoff from a raw state, matching payoff() on a
// PathSet entry for entry.
double state_payoff(const PayoffSpec& spec, std::span<const double> prices,
                    double discount) {
    double best = 0.0;
    for (double v : prices) best = std::max(best, v);
    const double intrinsic = best - spec.strike;
    return intrinsic <= 0.0 ? 0.0 : discount * intrinsic;
}

struct PathContext {
    const RegressionPolicy& policy;
    const PathModel& model;
    const PathSet& outer;
    const PayoffSpec& payoff_spec;
    const DivergenceSpec& spec;
    double x;
    const DualConfig& cfg;
    std::vector<double> discount;  // e^{-r t_j} per date

    // Average of Z at the policy's first stop >= from_date + 1, over
    // n_inner sub-paths branched from the outer state at from_date.
    double inner_value(int path, int from_date) const {
        SubstreamRng rng(cfg.seed, StreamPurpose::Inner,
                         static_cast<std::uint64_t>(path),
                         static_cast<std::uint64_t>(from_date));
        const auto start = outer.state(path, from_date);
        const int J = policy.steps;
        thread_local std::vector<double> work;
        work.resize(start.size());
        double acc = 0.0;
        for (int s = 0; s < cfg.n_inner; ++s) {
            std::copy(start.begin(), start.end(), work.begin());
            for (int t = from_date + 1; t <= J; ++t) {
                model.step(work, t - 1, rng);
                const double y = state_payoff(payoff_spec, work, discount[t]);
                const double z = phi_star(spec, x + y) - x;
                if (t == J || policy.stops_at(t, work, y, z)) {
                    acc += z;
                    break;
                }
            }
        }
        return acc / cfg.n_inner;
    }
};

}  // namespace

std::vector<double> build_martingale_increments(
    const RegressionPolicy& policy, const PathModel& model, const PathSet& outer,
    int path, const PayoffSpec& payoff_spec, const DivergenceSpec& spec, double x,
    const DualConfig& cfg) {
    cfg.validate();
    policy.validate();
    if (path < 0 || path >= outer.n_paths)
        throw ValidationError("dual: path index out of range");
    if (outer.n_dates - 1 != policy.steps)
        throw ValidationError("dual: policy fitted for " +
                              std::to_string(policy.steps) + " steps, paths have " +
                              std::to_string(outer.n_dates - 1));
    if (model.assets() != outer.n_assets)
        throw ValidationError("dual: model/path asset count mismatch");

    const int J = policy.steps;
    PathContext ctx{policy, model,        outer, payoff_spec,
                    spec,   x,            cfg,   {}};
    ctx.discount.resize(J + 1);
    for (int j = 0; j <= J; ++j)
        ctx.discount[j] = std::exp(-model.params().r * model.grid().dates[j]);

    std::vector<double> m(J + 1, 0.0);
    if (J == 0) return m;

    double inner_here = ctx.inner_value(path, 0);
    for (int j = 0; j < J; ++j) {
        const int next = j + 1;
        const double y = payoff(payoff_spec, outer, path, next);
        const double z = phi_star(spec, x + y) - x;
        // inner at `next` doubles as the continuation value in this
        // increment and as the conditional mean in the following one.
        const double inner_next = next < J ? ctx.inner_value(path, next) : 0.0;
        const bool stops =
            next == J || policy.stops_at(next, outer.state(path, next), y, z);
        const double vhat = stops ? z : inner_next;
        m[next] = m[j] + vhat - inner_here;
        inner_here = inner_next;
    }
    return m;
}

BoundEstimate upper_bound(const RegressionPolicy& policy, const PathModel& model,
                          const PathSet& outer, const PayoffSpec& payoff_spec,
                          const DivergenceSpec& spec, double x,
                          const DualConfig& cfg) {
    cfg.validate();
    policy.validate();
    if (outer.n_paths < 2)
        throw ValidationError("upper_bound: need at least 2 outer paths");
    const int n = outer.n_paths;
    const int J = policy.steps;

    std::vector<double> sups(n);
    parallel_for(n, [&](long i) {
        const auto m = build_martingale_increments(
            policy, model, outer, static_cast<int>(i), payoff_spec, spec, x, cfg);
        double sup = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= J; ++j) {
            const double y = payoff(payoff_spec, outer, static_cast<int>(i), j);
            const double z = phi_star(spec, x + y) - x;
            sup = std::max(sup, z - m[j]);
        }
        sups[i] = sup;
    });

    double mean = 0.0;
    for (double v : sups) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : sups) ss += (v - mean) * (v - mean);

    BoundEstimate est;
    est.value = mean;
    est.std_error = std::sqrt(ss / (n - 1)) / std::sqrt(double(n));
    est.n = n;
    est.x_star = x;
    est.kind = BoundKind::Upper;
    return est;
}

BoundEstimate upper_bound_given_martingale(const Eigen::MatrixXd& z_rows,
                                           const Eigen::MatrixXd& m_rows,
                                           double x) {
    if (z_rows.rows() != m_rows.rows() || z_rows.cols() != m_rows.cols())
        throw ValidationError("upper_bound: reward/martingale shape mismatch");
    if (z_rows.rows() < 2)
        throw ValidationError("upper_bound: need at least 2 rows");
    const Eigen::VectorXd sups = (z_rows - m_rows).rowwise().maxCoeff();
    const long n = sups.size();
    const double mean = sups.mean();
    const double ss = (sups.array() - mean).square().sum();

    BoundEstimate est;
    est.value = mean;
    est.std_error = std::sqrt(ss / (n - 1)) / std::sqrt(double(n));
    est.n = n;
    est.x_star = x;
    est.kind = BoundKind::Upper;
    return est;
}

BoundEstimate dual_value(const PathModel& model, const PayoffSpec& payoff_spec,
                         const DivergenceSpec& spec,
                         std::span<const RegressionPolicy> policies,
                         const DualConfig& cfg) {
    cfg.validate();
    if (policies.empty())
        throw ValidationError("dual_value: need at least one policy");
    const PathSet outer =
        model.sample(cfg.n_outer, cfg.seed, StreamPurpose::FinalEval);

    BoundEstimate best;
    best.value = std::numeric_limits<double>::infinity();
    for (const auto& policy : policies) {
        const BoundEstimate e = upper_bound(policy, model, outer, payoff_spec,
                                            spec, policy.shift, cfg);
        if (e.value < best.value) best = e;
    }
    return best;
}

}  // namespace riskstop

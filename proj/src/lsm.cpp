// SPDX-License-Identifier: MIT
#include "riskstop/lsm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "riskstop/errors.hpp"
#include "riskstop/optimize.hpp"

namespace riskstop {

BasisSpec BasisSpec::sorted_monomials(int assets, int max_degree) {
    if (assets < 1) throw ValidationError("basis: assets must be >= 1");
    if (max_degree < 0) throw ValidationError("basis: degree must be >= 0");
    BasisSpec b;
    b.assets_ = assets;
    b.degree_ = max_degree;
    b.family_ = "sorted_monomials";

    std::vector<int> e(assets, 0);
    std::function<void(int, int)> emit = [&](int pos, int left) {
        if (pos == assets - 1) {
            e[pos] = left;
            b.exponents_.push_back(e);
            return;
        }
        for (int k = left; k >= 0; --k) {
            e[pos] = k;
            emit(pos + 1, left - k);
        }
        e[pos] = 0;
    };
    for (int total = 0; total <= max_degree; ++total) emit(0, total);

    for (const auto& exps : b.exponents_) {
        std::string name;
        for (int k = 0; k < assets; ++k) {
            if (exps[k] == 0) continue;
            if (!name.empty()) name += "*";
            name += "s" + std::to_string(k + 1);
            if (exps[k] > 1) name += "^" + std::to_string(exps[k]);
        }
        b.names_.push_back(name.empty() ? "1" : name);
    }
    b.names_.push_back("y");
    b.names_.push_back("y^2");
    return b;
}

void BasisSpec::evaluate(std::span<const double> prices, double y,
                         std::span<double> out) const {
    if (static_cast<int>(prices.size()) != assets_ ||
        static_cast<int>(out.size()) != size())
        throw ValidationError("basis: evaluate size mismatch");
    thread_local std::vector<double> sorted;
    sorted.assign(prices.begin(), prices.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::size_t m = 0;
    for (const auto& exps : exponents_) {
        double v = 1.0;
        for (int k = 0; k < assets_; ++k)
            for (int p = 0; p < exps[k]; ++p) v *= sorted[k];
        out[m++] = v;
    }
    out[m++] = y;
    out[m] = y * y;
}

bool RegressionPolicy::stops_at(int date, std::span<const double> prices,
                                double /*y*/, double z) const {
    if (date >= steps) return true;  // the final date always stops
    if (date == 0) return z >= root_continuation;
    thread_local std::vector<double> feat;
    feat.resize(static_cast<std::size_t>(basis.size()));
    // The payoff feature is the exercise value z of the problem being
    // fitted, so the basis adapts its scale to the risk transform.
    basis.evaluate(prices, z, feat);
    const Eigen::VectorXd& beta = coeffs[date - 1];
    double fitted = 0.0;
    for (Eigen::Index k = 0; k < beta.size(); ++k) fitted += beta(k) * feat[k];
    return z >= fitted;
}

void RegressionPolicy::validate() const {
    if (steps < 0) throw ValidationError("policy: negative step count");
    if (static_cast<int>(coeffs.size()) != std::max(0, steps - 1))
        throw ValidationError("policy: expected " +
                              std::to_string(std::max(0, steps - 1)) +
                              " coefficient vectors, have " +
                              std::to_string(coeffs.size()));
    for (const auto& beta : coeffs) {
        if (beta.size() != basis.size())
            throw ValidationError("policy: coefficient length != basis size");
        if (!beta.allFinite())
            throw ValidationError("policy: non-finite coefficients");
    }
    if (!std::isfinite(shift) || !std::isfinite(root_continuation))
        throw ValidationError("policy: non-finite scalars");
}

nlohmann::json RegressionPolicy::to_json() const {
    nlohmann::json doc;
    doc["x"] = shift;
    doc["steps"] = steps;
    doc["basis"] = {{"family", basis.family()},
                    {"assets", basis.assets()},
                    {"degree", basis.degree()},
                    {"names", basis.names()}};
    doc["root_continuation"] = root_continuation;
    auto& rows = doc["coefficients"] = nlohmann::json::array();
    for (const auto& beta : coeffs)
        rows.push_back(std::vector<double>(beta.data(), beta.data() + beta.size()));
    doc["ridge_dates"] = ridge_dates;
    return doc;
}

RegressionPolicy RegressionPolicy::from_json(const nlohmann::json& doc) {
    RegressionPolicy pol;
    try {
        const auto& jb = doc.at("basis");
        if (jb.at("family").get<std::string>() != "sorted_monomials")
            throw ValidationError("policy: unknown basis family " +
                                  jb.at("family").get<std::string>());
        pol.basis = BasisSpec::sorted_monomials(jb.at("assets").get<int>(),
                                                jb.at("degree").get<int>());
        pol.shift = doc.at("x").get<double>();
        pol.steps = doc.at("steps").get<int>();
        pol.root_continuation = doc.at("root_continuation").get<double>();
        for (const auto& row : doc.at("coefficients")) {
            const auto v = row.get<std::vector<double>>();
            pol.coeffs.emplace_back(
                Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
        }
        if (doc.contains("ridge_dates"))
            pol.ridge_dates = doc["ridge_dates"].get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("policy: ") + e.what());
    }
    pol.validate();
    return pol;
}

RegressionPolicy fit_policy(const PathSet& training, const PayoffSpec& payoff_spec,
                            const DivergenceSpec& spec, double x,
                            const BasisSpec& basis) {
    spec.validate();
    payoff_spec.validate();
    if (!std::isfinite(x)) throw ValidationError("fit_policy: x must be finite");
    if (basis.assets() != training.n_assets)
        throw ValidationError("fit_policy: basis is for " +
                              std::to_string(basis.assets()) + " assets, paths have " +
                              std::to_string(training.n_assets));
    const int n = training.n_paths;
    const int m = basis.size();
    const int J = training.n_dates - 1;
    if (n < m)
        throw ValidationError("fit_policy: need at least " + std::to_string(m) +
                              " training paths");

    RegressionPolicy pol;
    pol.shift = x;
    pol.steps = J;
    pol.basis = basis;
    pol.coeffs.resize(static_cast<std::size_t>(std::max(0, J - 1)));

    auto z_at = [&](int i, int j) {
        return phi_star(spec, x + payoff(payoff_spec, training, i, j)) - x;
    };

    // Realized downstream cash flow per path, shrinking backward in time.
    std::vector<double> cash(n);
    for (int i = 0; i < n; ++i) cash[i] = z_at(i, J);

    Eigen::MatrixXd B(n, m);
    std::vector<double> feat(m);
    for (int j = J - 1; j >= 1; --j) {
        for (int i = 0; i < n; ++i) {
            basis.evaluate(training.state(i, j), z_at(i, j), feat);
            for (int k = 0; k < m; ++k) B(i, k) = feat[k];
        }
        const Eigen::Map<const Eigen::VectorXd> c(cash.data(), n);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
        Eigen::VectorXd beta;
        if (qr.rank() < m) {
            // Degenerate states (for example sigma = 0) collapse the design
            // matrix; a tiny ridge keeps the fit defined and is reported.
            Eigen::MatrixXd G = B.transpose() * B;
            const double lambda =
                std::max(1e-10 * G.trace() / m, 1e-300);
            G.diagonal().array() += lambda;
            beta = G.ldlt().solve(B.transpose() * c);
            pol.ridge_dates.push_back(j);
        } else {
            beta = qr.solve(c);
        }
        for (int i = 0; i < n; ++i) {
            const double zj = z_at(i, j);
            if (zj >= B.row(i).dot(beta)) cash[i] = zj;
        }
        pol.coeffs[static_cast<std::size_t>(j - 1)] = std::move(beta);
    }

    double mean = 0.0;
    for (double v : cash) mean += v;
    pol.root_continuation = mean / n;
    return pol;
}

BoundEstimate lower_bound(const RegressionPolicy& policy, const PathSet& testing,
                          const PayoffSpec& payoff_spec,
                          const DivergenceSpec& spec, double x) {
    policy.validate();
    if (testing.n_paths < 2)
        throw ValidationError("lower_bound: need at least 2 paths");
    if (testing.n_dates - 1 != policy.steps)
        throw ValidationError("lower_bound: policy fitted for " +
                              std::to_string(policy.steps) + " steps, paths have " +
                              std::to_string(testing.n_dates - 1));
    const int n = testing.n_paths;
    const int J = policy.steps;

    std::vector<double> realized(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= J; ++j) {
            const double y = payoff(payoff_spec, testing, i, j);
            const double z = phi_star(spec, x + y) - x;
            if (policy.stops_at(j, testing.state(i, j), y, z)) {
                realized[i] = z;
                break;
            }
        }
    }
    double mean = 0.0;
    for (double v : realized) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : realized) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (n - 1)) / std::sqrt(double(n));

    BoundEstimate est;
    est.value = mean;
    est.std_error = se;
    est.n = n;
    est.x_star = x;
    est.kind = BoundKind::Lower;
    return est;
}

void PrimalConfig::validate() const {
    if (n_training < 2 || n_testing < 2)
        throw ValidationError("primal: path counts must be >= 2");
    if (grid_points < 4)
        throw ValidationError("primal: need at least 4 grid points");
}

BoundEstimate primal_value(const PathModel& model, const PayoffSpec& payoff_spec,
                           const DivergenceSpec& spec, const BasisSpec& basis,
                           const ShiftSearchConfig& search,
                           const PrimalConfig& cfg,
                           RegressionPolicy* policy_out,
                           PrimalDiagnostics* diagnostics) {
    spec.validate();
    search.validate();
    cfg.validate();
    const PathSet training =
        model.sample(cfg.n_training, cfg.seed, StreamPurpose::Training);

    auto finish = [&](double x_hat) {
        const RegressionPolicy pol =
            fit_policy(training, payoff_spec, spec, x_hat, basis);
        const PathSet final_paths =
            model.sample(cfg.n_testing, cfg.seed, StreamPurpose::FinalEval);
        BoundEstimate est = lower_bound(pol, final_paths, payoff_spec, spec, x_hat);
        est.x_star = x_hat;
        if (policy_out) *policy_out = pol;
        return est;
    };

    if (spec.mean_like()) return finish(0.0);

    const PathSet testing =
        model.sample(cfg.n_testing, cfg.seed, StreamPurpose::Testing);

    // Common random numbers: one training and one testing sample serve
    // every shift, so the grid comparison sees the objective, not noise.
    auto eval = [&](double x) {
        const RegressionPolicy pol =
            fit_policy(training, payoff_spec, spec, x, basis);
        return lower_bound(pol, testing, payoff_spec, spec, x);
    };

    double y_max = 0.0;
    for (int i = 0; i < training.n_paths; ++i)
        for (int j = 0; j < training.n_dates; ++j)
            y_max = std::max(y_max, payoff(payoff_spec, training, i, j));

    const bool capped =
        search.upper_cap_at_zero && spec.kind == DivergenceKind::AVaR;
    double lo = -(y_max + 1.0);
    double hi = capped ? 0.0 : y_max + 1.0;

    const int G = cfg.grid_points;
    std::vector<double> xs(G), vals(G), ses(G);
    int k = 0;
    bool bracketed = false;
    for (int round = 0; round < 60 && !bracketed; ++round) {
        for (int g = 0; g < G; ++g) {
            xs[g] = lo + (hi - lo) * g / (G - 1);
            const BoundEstimate e = eval(xs[g]);
            vals[g] = e.value;
            ses[g] = e.std_error;
        }
        k = static_cast<int>(std::min_element(vals.begin(), vals.end()) -
                             vals.begin());
        const double width = hi - lo;
        if (k == 0) {
            lo -= width;
        } else if (k == G - 1 && !capped) {
            hi += width;
        } else {
            bracketed = true;  // interior argmin, or pressed against the cap
        }
    }
    if (!bracketed) {
        std::string grid = "grid";
        for (int g = 0; g < G; ++g)
            grid += " (" + std::to_string(xs[g]) + ", " + std::to_string(vals[g]) + ")";
        throw NumericError("primal_value: no bracket for the x-search; " + grid);
    }
    if (diagnostics) {
        diagnostics->grid_x.assign(xs.begin(), xs.end());
        diagnostics->grid_value.assign(vals.begin(), vals.end());
        diagnostics->grid_std_error.assign(ses.begin(), ses.end());
    }

    MinimizeOptions opt;
    opt.x_tol = search.x_tolerance;
    opt.hard_lo = xs[std::max(0, k - 1)];
    opt.hard_hi = xs[std::min(G - 1, k + 1)];
    const MinimizeResult refined = minimize_convex(
        [&](double x) { return eval(x).value; }, opt.hard_lo, opt.hard_hi, opt);

    // Fresh stream for the reported estimate: the selected shift must not
    // be evaluated on the sample that chose it.
    return finish(refined.x);
}

}  // namespace riskstop

// SPDX-License-Identifier: MIT
#pragma once

#include <span>
#include <string>

#include "riskstop/errors.hpp"

namespace riskstop {

enum class DivergenceKind { AVaR, Entropic, Power, RiskNeutral };

/// One member of the supported divergence family together with its
/// parameter: AVaR(level alpha in (0,1]), Entropic(gamma > 0),
/// Power(exponent p > 1), or RiskNeutral (plain expectation).
///
/// Everything downstream works through the convex conjugate of the
/// divergence, evaluated by phi_star below; the risk of a position is the
/// optimized certainty equivalent inf_x E[phi_star(x + Y) - x].
struct DivergenceSpec {
    DivergenceKind kind = DivergenceKind::RiskNeutral;
    double param = 0.0;  // alpha, gamma or p depending on kind

    static DivergenceSpec avar(double alpha) {
        return {DivergenceKind::AVaR, alpha};
    }
    static DivergenceSpec entropic(double gamma) {
        return {DivergenceKind::Entropic, gamma};
    }
    static DivergenceSpec power(double p) {
        return {DivergenceKind::Power, p};
    }
    static DivergenceSpec risk_neutral() {
        return {DivergenceKind::RiskNeutral, 0.0};
    }

    /// Throws ValidationError when the parameter is out of range.
    void validate() const;

    /// True when the risk functional collapses to the plain mean
    /// (RiskNeutral, or AVaR at level 1). These skip the shift search.
    bool mean_like() const {
        return kind == DivergenceKind::RiskNeutral ||
               (kind == DivergenceKind::AVaR && param == 1.0);
    }

    /// Stable identifier such as "avar:0.5" or "neutral"; used in reports
    /// and accepted back by parse_risk.
    std::string label() const;
};

/// Parses "avar:0.5", "entropic:0.01", "power:2" or "neutral".
DivergenceSpec parse_risk(const std::string& text);

/// Search controls for the outer 1-D minimization over the shift x.
struct ShiftSearchConfig {
    double bracket_expansion_factor = 2.0;
    double x_tolerance = 1e-8;
    int max_iterations = 200;
    /// Restrict the search to x <= 0. Only meaningful for AVaR with
    /// alpha < 1, where the restriction loses nothing; other kinds
    /// ignore it because their minimizers may be positive.
    bool upper_cap_at_zero = true;

    void validate() const;
};

/// Convex conjugate of the divergence, the closed form per kind:
///   AVaR(alpha):    y+ / alpha
///   Entropic(gamma): (exp(gamma y) - 1) / gamma
///   Power(p):       (y+)^(p/(p-1)) * (p-1)/p
///   RiskNeutral:    y+
/// Total on the reals; phi_star(spec, 0) == 0 for every kind.
double phi_star(const DivergenceSpec& spec, double y);

/// Right derivative of phi_star. Kinks (AVaR at 0) take the right limit.
double phi_star_right_deriv(const DivergenceSpec& spec, double y);

/// Sample objective (1/N) sum_i phi_star(x + y_i) - x; convex in x.
/// Throws ValidationError on an empty sample.
double oce_objective(const DivergenceSpec& spec, std::span<const double> samples,
                     double x);

struct OceResult {
    double value = 0.0;
    double x_star = 0.0;
    int evaluations = 0;
};

/// Optimized certainty equivalent of a sample: minimizes oce_objective
/// over the shift x. Mean-like specs (RiskNeutral, AVaR(1)) skip the
/// search; the objective is flat at the sample mean for every
/// x >= -min(sample), and the reported x* is max(0, -min(sample)).
///
/// The bracket starts at [-(max|y|+1), max|y|+1] and grows geometrically;
/// coercivity of phi_star(y) - y in both directions makes this terminate.
/// Throws NumericError if bracketing fails within cfg.max_iterations.
OceResult oce_value(const DivergenceSpec& spec, std::span<const double> samples,
                    const ShiftSearchConfig& cfg = {});

/// ln(mean exp(gamma y_i)) / gamma via log-sum-exp shifted by the max
/// sample, the overflow-safe route. Independent of the oce_value path and
/// used to cross-check it.
double entropic_closed_form(double gamma, std::span<const double> samples);

}  // namespace riskstop

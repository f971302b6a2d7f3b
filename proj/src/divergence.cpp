// SPDX-License-Identifier: MIT
#include "riskstop/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "riskstop/optimize.hpp"

namespace riskstop {

void DivergenceSpec::validate() const {
    switch (kind) {
        case DivergenceKind::AVaR:
            if (!(param > 0.0 && param <= 1.0))
                throw ValidationError("avar level must satisfy 0 < alpha <= 1, got " +
                                      std::to_string(param));
            break;
        case DivergenceKind::Entropic:
            if (!(param > 0.0))
                throw ValidationError("entropic coefficient must be positive, got " +
                                      std::to_string(param));
            break;
        case DivergenceKind::Power:
            if (!(param > 1.0))
                throw ValidationError("power exponent must exceed 1, got " +
                                      std::to_string(param));
            break;
        case DivergenceKind::RiskNeutral:
            break;
    }
    if (!std::isfinite(param) && kind != DivergenceKind::RiskNeutral)
        throw ValidationError("divergence parameter must be finite");
}

std::string DivergenceSpec::label() const {
    char buf[64];
    switch (kind) {
        case DivergenceKind::AVaR:
            std::snprintf(buf, sizeof buf, "avar:%.10g", param);
            break;
        case DivergenceKind::Entropic:
            std::snprintf(buf, sizeof buf, "entropic:%.10g", param);
            break;
        case DivergenceKind::Power:
            std::snprintf(buf, sizeof buf, "power:%.10g", param);
            break;
        case DivergenceKind::RiskNeutral:
            return "neutral";
    }
    return buf;
}

DivergenceSpec parse_risk(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    DivergenceSpec spec;
    if (head == "neutral" || head == "riskneutral") {
        if (colon != std::string::npos)
            throw ValidationError("risk 'neutral' takes no parameter: " + text);
        return DivergenceSpec::risk_neutral();
    }
    if (colon == std::string::npos)
        throw ValidationError("risk spec needs a parameter, e.g. avar:0.5, got: " + text);
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(text.substr(colon + 1), &used);
        if (colon + 1 + used != text.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ValidationError("bad numeric parameter in risk spec: " + text);
    }
    if (head == "avar")
        spec = DivergenceSpec::avar(value);
    else if (head == "entropic")
        spec = DivergenceSpec::entropic(value);
    else if (head == "power")
        spec = DivergenceSpec::power(value);
    else
        throw ValidationError("unknown risk kind '" + head +
                              "' (expected avar, entropic, power or neutral)");
    spec.validate();
    return spec;
}

void ShiftSearchConfig::validate() const {
    if (!(x_tolerance > 0.0))
        throw ValidationError("x_tolerance must be positive");
    if (max_iterations < 1)
        throw ValidationError("max_iterations must be at least 1");
    if (!(bracket_expansion_factor > 1.0))
        throw ValidationError("bracket_expansion_factor must exceed 1");
}

double phi_star(const DivergenceSpec& spec, double y) {
    switch (spec.kind) {
        case DivergenceKind::AVaR:
            return y > 0.0 ? y / spec.param : 0.0;
        case DivergenceKind::Entropic:
            return std::expm1(spec.param * y) / spec.param;
        case DivergenceKind::Power: {
            if (y <= 0.0) return 0.0;
            const double q = spec.param / (spec.param - 1.0);
            return std::pow(y, q) * (spec.param - 1.0) / spec.param;
        }
        case DivergenceKind::RiskNeutral:
            return y > 0.0 ? y : 0.0;
    }
    return 0.0;
}

double phi_star_right_deriv(const DivergenceSpec& spec, double y) {
    switch (spec.kind) {
        case DivergenceKind::AVaR:
            return y >= 0.0 ? 1.0 / spec.param : 0.0;
        case DivergenceKind::Entropic:
            return std::exp(spec.param * y);
        case DivergenceKind::Power: {
            if (y <= 0.0) return 0.0;
            // d/dy [ y^q (p-1)/p ] = y^(q-1) because q (p-1)/p == 1.
            return std::pow(y, 1.0 / (spec.param - 1.0));
        }
        case DivergenceKind::RiskNeutral:
            return y >= 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double oce_objective(const DivergenceSpec& spec, std::span<const double> samples,
                     double x) {
    if (samples.empty())
        throw ValidationError("oce_objective: empty sample");
    double acc = 0.0;
    for (double y : samples) acc += phi_star(spec, x + y);
    return acc / static_cast<double>(samples.size()) - x;
}

OceResult oce_value(const DivergenceSpec& spec, std::span<const double> samples,
                    const ShiftSearchConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (samples.empty())
        throw ValidationError("oce_value: empty sample");

    if (spec.mean_like()) {
        double mean = 0.0, lo = samples[0];
        for (double y : samples) {
            mean += y;
            lo = std::min(lo, y);
        }
        mean /= static_cast<double>(samples.size());
        // E[(x+Y)+ ] - x is flat at the mean for every x >= -min(Y).
        return {mean, std::max(0.0, -lo), 0};
    }

    double abs_max = 0.0;
    for (double y : samples) abs_max = std::max(abs_max, std::abs(y));

    MinimizeOptions opt;
    opt.x_tol = cfg.x_tolerance;
    opt.grow_factor = cfg.bracket_expansion_factor;
    opt.max_grow_iter = cfg.max_iterations;
    if (cfg.upper_cap_at_zero && spec.kind == DivergenceKind::AVaR)
        opt.hard_hi = 0.0;

    const double half = abs_max + 1.0;
    const double lo = -half;
    const double hi = std::min(half, opt.hard_hi);
    auto objective = [&](double x) { return oce_objective(spec, samples, x); };
    const MinimizeResult r =
        minimize_convex(objective, std::min(lo, hi - 1e-6), hi, opt);
    return {r.value, r.x, r.evaluations};
}

double entropic_closed_form(double gamma, std::span<const double> samples) {
    if (!(gamma > 0.0))
        throw ValidationError("entropic_closed_form: gamma must be positive");
    if (samples.empty())
        throw ValidationError("entropic_closed_form: empty sample");
    const double shift = *std::max_element(samples.begin(), samples.end());
    double acc = 0.0;
    for (double y : samples) acc += std::exp(gamma * (y - shift));
    return shift + std::log(acc / static_cast<double>(samples.size())) / gamma;
}

}  // namespace riskstop

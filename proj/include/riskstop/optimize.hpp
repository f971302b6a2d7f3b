// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "riskstop/errors.hpp"

namespace riskstop {

struct MinimizeOptions {
    double x_tol = 1e-8;          // absolute tolerance on the minimizer
    double grow_factor = 2.0;     // geometric bracket expansion
    int max_grow_iter = 200;      // expansion steps per side before giving up
    double hard_lo = -std::numeric_limits<double>::infinity();
    double hard_hi = std::numeric_limits<double>::infinity();
};

struct MinimizeResult {
    double x = 0.0;
    double value = 0.0;
    int evaluations = 0;
    double bracket_lo = 0.0;   // final enclosing interval, for diagnostics
    double bracket_hi = 0.0;
};

/// Minimizes a convex function of one variable.
///
/// Starting from [lo, hi], each side is pushed out geometrically until the
/// midpoint value no longer exceeds the endpoint value on that side, so the
/// minimum is interior (coercive objectives guarantee this terminates).
/// Sides clamped by hard_lo/hard_hi stop expanding; a boundary minimum is
/// then found by the golden-section phase, which tolerates it.
///
/// Throws NumericError if a side cannot be bracketed within max_grow_iter
/// expansions, which in practice means the objective is not coercive in
/// that direction (a mis-specified divergence).
template <class F>
MinimizeResult minimize_convex(F&& f, double lo, double hi,
                               const MinimizeOptions& opt = {}) {
    if (!(lo < hi)) throw NumericError("minimize_convex: empty interval");
    int evals = 0;
    auto eval = [&](double x) {
        ++evals;
        return f(x);
    };

    lo = std::max(lo, opt.hard_lo);
    hi = std::min(hi, opt.hard_hi);
    double mid = 0.5 * (lo + hi);
    double f_lo = eval(lo), f_mid = eval(mid), f_hi = eval(hi);

    // Convexity: the minimum lies left of mid iff f(lo) < f(mid); keep
    // pushing the corresponding endpoint until both ends dominate mid.
    for (int it = 0;; ++it) {
        bool moved = false;
        if (f_lo < f_mid && lo > opt.hard_lo) {
            const double span = mid - lo;
            mid = lo;
            f_mid = f_lo;
            lo = std::max(opt.hard_lo, lo - span * opt.grow_factor);
            f_lo = eval(lo);
            moved = true;
        }
        if (f_hi < f_mid && hi < opt.hard_hi) {
            const double span = hi - mid;
            mid = hi;
            f_mid = f_hi;
            hi = std::min(opt.hard_hi, hi + span * opt.grow_factor);
            f_hi = eval(hi);
            moved = true;
        }
        if (!moved) break;
        if (it >= opt.max_grow_iter)
            throw NumericError(
                "minimize_convex: failed to bracket a minimum after " +
                std::to_string(opt.max_grow_iter) + " expansions");
    }

    // Golden-section contraction on [lo, hi]. The interval shrinks by
    // a fixed ratio per step, so the iteration bound below is exact.
    static const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;  // 0.618...
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    const int max_iter = 10000;
    for (int it = 0; (b - a) > opt.x_tol && it < max_iter; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = eval(x2);
        }
    }

    MinimizeResult res;
    res.x = (f1 <= f2) ? x1 : x2;
    res.value = std::min(f1, f2);
    // Boundary minima sit at a clamped endpoint; report the endpoint itself
    // when it beats the interior probes.
    const double f_a = eval(a), f_b = eval(b);
    if (f_a < res.value) {
        res.x = a;
        res.value = f_a;
    }
    if (f_b < res.value) {
        res.x = b;
        res.value = f_b;
    }
    res.evaluations = evals;
    res.bracket_lo = a;
    res.bracket_hi = b;
    return res;
}

}  // namespace riskstop

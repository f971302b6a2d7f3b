// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskstop/config.hpp"
#include "riskstop/lattice.hpp"
#include "riskstop/lsm.hpp"

namespace riskstop {

/// One priced risk level: the primal and dual estimates at the selected
/// shift, plus wall time.
struct ReportRow {
    std::string risk;   // kind, e.g. "avar"
    std::string label;  // full spec, e.g. "avar:0.5"
    BoundEstimate lower;
    BoundEstimate upper;
    double x_star = 0.0;
    double seconds = 0.0;
};

/// CSV with header risk,label,lower,lower_sd,upper,upper_sd,x_star,seconds.
/// Numbers print with %.10g so identical runs emit identical bytes;
/// with_timing=false zeroes the seconds column for byte comparison.
std::string report_csv(std::span<const ReportRow> rows, bool with_timing = true);
nlohmann::json report_json(std::span<const ReportRow> rows,
                           bool with_timing = true);

/// Prices one risk level under the config: primal_value for the lower
/// bound and the policy, then dual_value at the selected shift.
ReportRow price_row(const RunConfig& cfg, const DivergenceSpec& spec);

/// price_row over every configured risk, in order.
std::vector<ReportRow> price_table(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Oracle suite: exact checks on scenario-tree fixtures

struct NamedFixture {
    std::string name;
    Lattice lattice;
};

/// Hand-built trees exercising every exact identity: a deterministic
/// chain, an asymmetric two-period tree, a one-period tree whose best
/// pure rule sits strictly below the randomized value, a four-period
/// binomial tree and a seeded random tree.
std::vector<NamedFixture> builtin_fixtures();

struct OracleOutcome {
    int passed = 0;
    int failed = 0;
    int skipped = 0;

    bool ok() const { return failed == 0; }
};

/// Runs dynamic programming vs enumeration, Doob-Meyer reconstruction,
/// the pathwise dual identity, tail-integral agreement, the mixture law,
/// minimax equality with the weak-duality chain, and saddle verification
/// on each fixture, writing one line per check. Enumeration-bound checks
/// are skipped (and counted) on fixtures beyond the rule cap.
OracleOutcome run_oracle_suite(std::span<const NamedFixture> fixtures,
                               std::ostream& out);

}  // namespace riskstop

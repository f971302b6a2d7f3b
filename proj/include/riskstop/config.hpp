// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskstop/divergence.hpp"
#include "riskstop/market.hpp"

namespace riskstop {

/// One experiment: a market, a payoff, one or more risk specs and the
/// Monte Carlo sizes. Defaults reproduce the benchmark used throughout
/// the tests (two-asset max-call, s0 = 90, K = 100, T = 3, J = 9,
/// 10^4/10^4/10^3 paths); every field can be overridden from a config
/// file or the command line.
struct RunConfig {
    GbmParams market;
    ExerciseGrid grid = ExerciseGrid::equidistant(3.0, 9);
    PayoffSpec payoff;
    std::vector<DivergenceSpec> risks;
    int n_training = 10000;
    int n_testing = 10000;
    int n_inner = 1000;
    std::uint64_t seed = 42;
    int grid_points = 9;
    int basis_degree = 3;
    ShiftSearchConfig search;
    std::string format = "csv";  // csv | json

    void validate() const;

    /// Overlays the fields present in doc onto the defaults. Unknown
    /// sections or keys are rejected by name.
    static RunConfig from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

/// Parses a config written either as JSON or as a small TOML subset:
/// `[section]` headers, `key = value` lines with string, bool, integer,
/// float or flat-array values, and `#` comments. Errors carry the line
/// number.
nlohmann::json parse_config_text(const std::string& text);

/// Reads the file and dispatches on content (a leading `{` means JSON).
nlohmann::json parse_config_file(const std::string& path);

}  // namespace riskstop

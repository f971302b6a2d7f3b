// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace riskstop {

/// Bad user input: malformed config, out-of-range parameter, unparsable
/// fixture. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what)
        : std::invalid_argument(what) {}
};

/// A numeric procedure failed to converge or hit a structural problem
/// (bracketing failure, rank collapse without ridge rescue, LP
/// infeasibility). Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace riskstop

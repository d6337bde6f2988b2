// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace wespe {

/// Validation failures: bad arguments, malformed configs, unusable datasets.
/// The CLI maps these to exit code 3.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what)
        : std::runtime_error(what) {}
};

/// Decode/encode and filesystem failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finiteness is part of the contract. The CLI maps
/// these to exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace wespe

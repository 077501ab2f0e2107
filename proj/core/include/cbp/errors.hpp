#pragma once

#include <stdexcept>
#include <string>

namespace cbp {

/// Invalid configuration (bad widths, bad hyperparameters, bad config files).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite ones are required (inputs, updates, losses).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent data files (IDX parsing, missing runs).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cbp

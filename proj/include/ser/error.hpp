#pragma once

#include <stdexcept>
#include <string>

namespace ser {

// Validation errors (bad config, bad data, contract violations detected up
// front) map to CLI exit code 1; anything else maps to 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : ValidationError {
    explicit ShapeError(const std::string& msg) : ValidationError(msg) {}
};

struct ConfigError : ValidationError {
    explicit ConfigError(const std::string& msg) : ValidationError(msg) {}
};

struct DataError : ValidationError {
    explicit DataError(const std::string& msg) : ValidationError(msg) {}
};

// Non-finite loss or other mid-run failures.
struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ser

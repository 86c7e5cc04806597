#pragma once

#include <stdexcept>
#include <string>

namespace hyperot {

// Validation-class errors: malformed inputs, shape disagreements, bad indices,
// unusable files or flags. The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : ValidationError {
    explicit DimensionError(const std::string& msg) : ValidationError(msg) {}
};

struct IndexError : ValidationError {
    explicit IndexError(const std::string& msg) : ValidationError(msg) {}
};

// Numeric-class errors: values outside a mathematical domain, non-finite
// intermediates, failed convergence. The CLI maps these to exit code 2.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : NumericError {
    explicit DomainError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace hyperot

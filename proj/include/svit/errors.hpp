#pragma once

#include <stdexcept>
#include <string>

namespace svit {

// Malformed configuration or inputs that violate an operation's
// preconditions. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Shape or extent mismatch between operands.
class DimensionError : public ValidationError {
public:
    explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

// Numerical failure: non-finite values, divergence, eigensolver
// non-convergence. The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace svit

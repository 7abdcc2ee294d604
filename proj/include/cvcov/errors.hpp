#pragma once

#include <stdexcept>
#include <string>

namespace cvcov {

/// Operands of incompatible size.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A model or estimator parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A closed-form expression evaluated outside its domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Numerical breakdown: solver non-convergence, singular sample, etc.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long dimension, double diagnostic)
        : std::runtime_error(what), dimension_(dimension), diagnostic_(diagnostic) {}

    long dimension() const noexcept { return dimension_; }
    double diagnostic() const noexcept { return diagnostic_; }

private:
    long dimension_;
    double diagnostic_;
};

}  // namespace cvcov

#pragma once

#include <stdexcept>
#include <string>

namespace pavsim {

/// Bad input: parameters, states or files that violate a documented contract.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (step-size guard, divergence, non-convergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pavsim

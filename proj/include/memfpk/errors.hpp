#pragma once

#include <stdexcept>
#include <string>

namespace memfpk {

/// Invalid or inconsistent run configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: CFL violation, divergence, non-finite values,
/// quadrature non-convergence. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required input artifact (ensemble, coefficient field, grid file) is absent.
/// Maps to CLI exit code 4.
class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace memfpk

/**
 * @file error.hpp
 * @brief Exception types shared by all irrig modules.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace irrig {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Vector or matrix sizes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input that fails validation (scenario keys, weather rows, file contents).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The implicit soil stepper could not converge, even after dt halving.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

/// The MIL encoding admitted no solution or a wrong one for a fixed input.
class EncodingError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace irrig

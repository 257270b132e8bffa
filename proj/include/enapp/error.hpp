#pragma once

#include <stdexcept>
#include <string>

namespace enapp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input (JSON field missing or of the wrong type).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but violates a model invariant (non-radial, bad partition, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Physical units cannot be resolved (e.g. kW fields without a declared base).
class UnitError : public Error {
public:
    using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Power flow encountered a non-positive squared voltage.
class VoltageCollapseError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

/// A distributed subproblem failed; carries the area and macro-iteration.
class SubproblemError : public Error {
public:
    SubproblemError(std::string area, int iteration, const std::string& what)
        : Error("area " + area + " failed at macro-iteration " + std::to_string(iteration) + ": " +
                what),
          area_(std::move(area)),
          iteration_(iteration) {}

    const std::string& area() const noexcept { return area_; }
    int iteration() const noexcept { return iteration_; }

private:
    std::string area_;
    int iteration_;
};

}  // namespace enapp

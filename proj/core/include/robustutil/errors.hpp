#pragma once

#include <stdexcept>
#include <string>

namespace robustutil {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. y <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A scalar root solve could not bracket or converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed input document; message carries line/field context.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The constraint polytope is empty, or not strictly feasible when required.
class InfeasibleModel : public Error {
public:
    using Error::Error;
};

/// Iterative solver stopped before meeting its tolerance.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// The dual objective grows without bound along an ascent ray.
class UnboundedDual : public Error {
public:
    using Error::Error;
};

/// The outer search over y found no interior minimum.
class BracketFailure : public Error {
public:
    using Error::Error;
};

/// Problem size exceeds the limit of a brute-force oracle.
class DimensionGuard : public Error {
public:
    using Error::Error;
};

}  // namespace robustutil

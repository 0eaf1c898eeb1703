#pragma once

#include <stdexcept>
#include <string>

namespace cmmd {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid arguments, malformed configuration or data layout. CLI exit code 2.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

// Failures arising during computation on structurally valid inputs. CLI exit code 3.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what) {}
};

// Data admits no answer (e.g. all pairwise distances zero in the median heuristic).
class DegenerateDataError : public NumericError {
public:
    explicit DegenerateDataError(const std::string& what) : NumericError(what) {}
};

// A matrix required to be positive semidefinite has an eigenvalue below tolerance.
class NotPsdError : public NumericError {
public:
    explicit NotPsdError(const std::string& what) : NumericError(what) {}
};

// Propensity evaluated outside the configured overlap band [delta, 1-delta].
class OverlapError : public NumericError {
public:
    explicit OverlapError(const std::string& what) : NumericError(what) {}
};

// Argument outside a function's mathematical domain (e.g. propensity at x outside (0,1)).
class DomainError : public NumericError {
public:
    explicit DomainError(const std::string& what) : NumericError(what) {}
};

// Propensity so extreme that bootstrap resampling keeps producing one-sided splits.
class DegeneratePropensityError : public NumericError {
public:
    explicit DegeneratePropensityError(const std::string& what) : NumericError(what) {}
};

}  // namespace cmmd

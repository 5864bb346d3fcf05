#pragma once

#include <stdexcept>
#include <string>

namespace corrsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stimulus level or scan point outside the device domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed arguments (inverted bounds, duplicate nodes, shape mismatch).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Weighting or schedule cannot be constructed from the given inputs.
class DesignError : public Error {
public:
    using Error::Error;
};

/// A level carrying nonzero weight is never visited by the stimulus.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Requested resolution (harmonic cutoff, half-period grid) is insufficient.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Slot boundaries do not fall on sample boundaries.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Control sweep faster than the aliasing limit pi / (T * omega_B).
class AliasingError : public Error {
public:
    AliasingError(const std::string& what, double limit) : Error(what), limit_(limit) {}
    double limit() const noexcept { return limit_; }

private:
    double limit_;
};

/// Dynamic weighting violates balanced packing.
class PackingError : public Error {
public:
    PackingError(const std::string& what, double ascending, double descending)
        : Error(what), ascending_(ascending), descending_(descending) {}
    double ascending_sum() const noexcept { return ascending_; }
    double descending_sum() const noexcept { return descending_; }

private:
    double ascending_;
    double descending_;
};

/// Systematic-error budget cannot be met by tuning.
class CalibrationError : public Error {
public:
    using Error::Error;
};

}  // namespace corrsynth

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynafed {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed config, inconsistent shapes, broken invariants.
/// The CLI maps this family to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InfeasiblePartitionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Binary input could not be decoded; `offset` is the byte position of the failure.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : ValidationError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class BadMagicError : public ParseError {
public:
    using ParseError::ParseError;
};

class BadVersionError : public ParseError {
public:
    using ParseError::ParseError;
};

class TruncatedFileError : public ParseError {
public:
    using ParseError::ParseError;
};

/// A graph node produced a NaN or infinity. `step` is the unroll step that
/// created the node, or -1 when the node was built outside an unroll.
class NumericOverflowError : public Error {
public:
    NumericOverflowError(const std::string& what, int step) : Error(what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Training produced non-finite parameters.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int step, int epoch = -1)
        : Error(what), step_(step), epoch_(epoch) {}

    int step() const noexcept { return step_; }
    int epoch() const noexcept { return epoch_; }

private:
    int step_;
    int epoch_;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class DegenerateTrajectoryError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace dynafed

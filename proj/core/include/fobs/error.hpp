#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fobs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)), position_(position) {}

    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Raised by evaluation: unbound symbol, division by zero, domain violation or
/// a non-finite intermediate. The message names the offending subexpression.
class EvalError : public Error {
public:
    EvalError(const std::string& message, std::string subexpression)
        : Error(message + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

    [[nodiscard]] const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

/// Malformed input files, unknown symbols, inconsistent dimensions.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Too many sample points failed to evaluate for a randomized check to be meaningful.
class IndeterminateError : public Error {
public:
    using Error::Error;
};

/// A pole set was not Hurwitz and the caller did not opt in to an unstable observer.
class UnstableError : public Error {
public:
    using Error::Error;
};

} // namespace fobs

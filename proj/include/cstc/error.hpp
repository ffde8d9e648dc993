#pragma once

#include <stdexcept>
#include <string>

namespace cstc {

/// Raised when caller-supplied data or configuration violates a precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed files; carries the offending 1-based line when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, long line, const std::string& what)
        : std::runtime_error(path + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Numerical breakdown during optimization (non-finite loss or gradient).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cstc

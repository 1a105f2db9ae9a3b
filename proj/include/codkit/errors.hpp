#pragma once

#include <stdexcept>
#include <string>

namespace codkit {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input that violates an operation's precondition (empty summary,
/// zero-length sequence, empty vote set, ...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// A malformed row in a line-oriented input file.
class RowError : public Error {
public:
    RowError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace codkit

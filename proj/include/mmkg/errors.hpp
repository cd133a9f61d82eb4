#pragma once

#include <stdexcept>
#include <string>

namespace mmkg {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user input: empty titles, out-of-range thresholds, schema violations.
/// The CLI maps this to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem problems: unreadable, missing, or unwritable files. Exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public IoError {
public:
    ParseError(const std::string& what, int line)
        : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// A remote service answered with a 5xx status or returned unusable data.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// The remote service could not be reached at all (connect/timeout).
class TransportError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

} // namespace mmkg

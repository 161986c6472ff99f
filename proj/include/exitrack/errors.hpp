#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exitrack {

/// Raised when a box operation receives the EXIT sentinel where a real box is required.
class SentinelArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed annotation / key=value input. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvalidSequenceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A metric whose value does not exist for the given input (e.g. AUROC with one class).
class UndefinedMetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite loss or gradient encountered during optimization.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace exitrack

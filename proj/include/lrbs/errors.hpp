#pragma once

#include <stdexcept>
#include <string>

namespace lrbs {

using invalid_argument = std::invalid_argument;

/// Raised when an exact oracle is asked to solve an instance beyond its size cutoff.
class size_limit_error : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class parse_error : public std::runtime_error {
public:
    parse_error(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class validation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A pickup-and-delivery move that would break a routing constraint.
class feasibility_error : public std::runtime_error {
public:
    feasibility_error(std::string constraint, const std::string& what)
        : std::runtime_error(constraint + " violated: " + what), constraint_(std::move(constraint)) {}

    /// "precedence" or "lifo"
    [[nodiscard]] const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Log-probabilities were recorded under an older version of the adaptation weights.
class staleness_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace lrbs

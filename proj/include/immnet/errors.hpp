#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace immnet {

/// Precondition or invariant violated by an argument (bad layout, empty
/// trajectory, point outside the plane, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative or adaptive computation stopped before reaching its target.
/// Carries the best estimate reached, its error bound and, for iterations,
/// the sequence of iterates.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double estimate, double error_bound,
                     std::vector<double> trace = {})
        : std::runtime_error(what),
          estimate_(estimate),
          error_bound_(error_bound),
          trace_(std::move(trace)) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    double estimate_;
    double error_bound_;
    std::vector<double> trace_;
};

/// Bad experiment configuration. key() names the offending entry.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace immnet

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cplus {

/// Malformed model or controller text. Carries the 1-based line number when known.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(std::string const& message, std::size_t line = 0)
        : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A caller broke an operation's precondition (invalid history, disabled action, ...).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bayesian update hit an observation with zero likelihood.
class InconsistentObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Product construction reached a (state, node) pair whose controller action is disabled.
class DisabledActionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Counterexample search cannot reach the requested mass, or hit its path cap.
class CounterexampleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TimeoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cplus

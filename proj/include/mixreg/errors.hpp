#pragma once

#include <stdexcept>
#include <string>

namespace mixreg {

// Rejected inputs: precondition violations and malformed arguments.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// An iterative method ran out of iterations; carries the last residual seen.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// A quantity left its numerically meaningful range (e.g. a radicand that must
// be nonnegative drifted far outside tolerance).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A Monte-Carlo conditioning event was never observed.
struct DegenerateEventError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mixreg

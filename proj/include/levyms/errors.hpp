#ifndef LEVYMS_ERRORS_HPP
#define LEVYMS_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace levyms {

/// Invalid argument or configuration value. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed to reach its accuracy target. Carries the
/// two competing estimates so callers can report them. Exit code 3.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double first, double second)
        : std::runtime_error(what), first_estimate(first), second_estimate(second) {}

    double first_estimate;
    double second_estimate;
};

/// A path left the finite range (or exceeded the rejection threshold).
/// `step` is the macro (or direct solver) step index, `substep` the micro
/// step inside it, or npos when not applicable.
class OverflowError : public std::runtime_error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    OverflowError(const std::string& what, std::size_t step_index, std::size_t substep_index = npos)
        : std::runtime_error(what + " at step " + std::to_string(step_index) +
                             (substep_index == npos ? std::string{}
                                                    : ", micro step " + std::to_string(substep_index))),
          step(step_index),
          substep(substep_index) {}

    std::size_t step;
    std::size_t substep;
};

/// Every path of an ensemble was rejected.
class EnsembleError : public std::runtime_error {
public:
    explicit EnsembleError(const std::string& what) : std::runtime_error(what) {}
};

/// A refinement schedule exceeds the configured micro-step budget. Exit code 4.
class BudgetError : public std::runtime_error {
public:
    BudgetError(const std::string& what, int offending_level)
        : std::runtime_error(what), level(offending_level) {}

    int level;
};

}  // namespace levyms

#endif  // LEVYMS_ERRORS_HPP

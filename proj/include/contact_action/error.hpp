#pragma once

#include <stdexcept>
#include <string>

namespace contact_action {

enum class ErrorKind {
    invalid_input,
    config,
    no_convergence,
    numerical_domain,
    blow_up,
    no_solution,
    infeasible_grid,
    internal_consistency,
    precondition_violation,
    construction,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::config: return "config";
        case ErrorKind::no_convergence: return "no-convergence";
        case ErrorKind::numerical_domain: return "numerical-domain";
        case ErrorKind::blow_up: return "blow-up";
        case ErrorKind::no_solution: return "no-solution";
        case ErrorKind::infeasible_grid: return "infeasible-grid";
        case ErrorKind::internal_consistency: return "internal-consistency";
        case ErrorKind::precondition_violation: return "precondition-violation";
        case ErrorKind::construction: return "construction";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Process exit code used by the CLI for an error of the given kind.
inline int exit_code(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::invalid_input:
            return 2;
        case ErrorKind::no_convergence:
        case ErrorKind::numerical_domain:
        case ErrorKind::blow_up:
        case ErrorKind::no_solution:
        case ErrorKind::infeasible_grid:
            return 3;
        case ErrorKind::precondition_violation:
        case ErrorKind::construction:
            return 4;
        case ErrorKind::internal_consistency:
            return 1;
    }
    return 1;
}

} // namespace contact_action

// errors.hpp — Exception hierarchy shared by all modules.
//
// Two broad failure classes map onto the CLI exit codes: bad or inconsistent
// input (exit 2) and numerical non-convergence (exit 3).

#pragma once

#include <stdexcept>
#include <string>

namespace qme {

// Invalid input: malformed operators, out-of-range arguments, schema errors.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A required structural property of the spectrum is missing (perturbative
// routes divide by Bohr gaps and refuse degenerate Hamiltonians).
class DegeneracyError : public ValidationError {
public:
    explicit DegeneracyError(const std::string& what) : ValidationError(what) {}
};

// A matrix expected to be positive semidefinite has a genuinely negative
// eigenvalue; carries the offending value.
class NotPsdError : public ValidationError {
public:
    NotPsdError(const std::string& what, double eigenvalue)
        : ValidationError(what), offending_eigenvalue(eigenvalue) {}
    double offending_eigenvalue;
};

// Quadrature refinement did not settle, an eigenproblem has no isolated
// zero mode, or an optimization came out degenerate.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qme

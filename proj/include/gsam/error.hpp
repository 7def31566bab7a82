#pragma once
#include <stdexcept>
#include <string>

namespace gsam {

/// Invalid input: bad shapes, out-of-domain values, malformed specs.
class ArgumentError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-finite quantities or a solver that did not converge.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// An inner solver stopped without meeting its tolerance.
class SolverError : public NumericalError
{
public:
    SolverError(const std::string& what, double residual)
        : NumericalError(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual)
    {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The outer optimizer produced a non-finite objective.
class DivergenceError : public NumericalError
{
public:
    explicit DivergenceError(int iteration)
        : NumericalError("objective became non-finite at iteration " + std::to_string(iteration)),
          iteration_(iteration)
    {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Data that cannot support the requested fit (constant response, degenerate folds).
class DegenerateDataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace gsam

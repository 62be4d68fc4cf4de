#pragma once

#include <stdexcept>
#include <string>

namespace gsmp {

/// Invalid parameters, mismatched dimensions or grids.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver (blow-up, singular regression, ...).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BlowUpError : public SolverError {
public:
    BlowUpError(std::size_t path, std::size_t step)
        : SolverError("non-finite state on path " + std::to_string(path) + " at step " +
                      std::to_string(step)),
          path_(path), step_(step) {}
    [[nodiscard]] std::size_t path() const noexcept { return path_; }
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t path_;
    std::size_t step_;
};

class RegressionError : public SolverError {
public:
    explicit RegressionError(std::size_t step)
        : SolverError("singular regression design at step " + std::to_string(step)), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace gsmp

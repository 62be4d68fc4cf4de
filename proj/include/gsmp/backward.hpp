#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gsmp/forward.hpp"
#include "gsmp/regression.hpp"

namespace gsmp {

struct BackwardConfig {
    ExponentParams params;
    TimeGrid grid;
    /// N x K, row i is the desired field at t_i.
    Matrix y_d;
    RegressionBasis basis = RegressionBasis::affine;
    std::size_t picard_max = 50;
    /// Absolute tolerance on E sup ||dz||^2_{D(A^delta)} + E sum dt ||dPhi||^2_HS.
    double picard_tol = 1e-20;
    double ridge = 1e-8;

    /// Requires the backward-mode exponent constraints.
    void validate(std::size_t K) const;
};

/// Adjoint state along a forward ensemble.
///
/// z_star is stored per path; Phi is kept as per-step regression weights and
/// evaluated on demand from the forward state.
struct BackwardSolution {
    TimeGrid grid;
    std::size_t K = 0;
    std::size_t J = 0;
    RegressionBasis basis = RegressionBasis::affine;
    std::vector<Matrix> z_star;  // per path K x (N+1)
    /// Step i regression, targets = [z (K), Phi column-major (K*J)].
    std::vector<LinearFit> regression_coeffs;
    std::vector<std::size_t> tau_index;
    std::size_t picard_iterations_used = 0;
    std::vector<double> residual_history;
    bool converged = false;

    [[nodiscard]] std::size_t paths() const noexcept { return z_star.size(); }
    /// Phi at step i of path p (zero for i >= tau and at i = N).
    [[nodiscard]] HSOperator phi(const ForwardEnsemble& forward, std::size_t p, std::size_t i) const;
    /// Phi(path, step) applied to the step's scaled Brownian increment.
    [[nodiscard]] Vector phi_times(const ForwardEnsemble& forward, std::size_t p, std::size_t i, const Vector& dw) const;
};

/// Picard iteration with regression-based conditional expectations.
[[nodiscard]] BackwardSolution solve_backward(const BackwardConfig& config, const ForwardEnsemble& forward,
                                              const Problem& problem);

/// Same recursion with resolvent-smoothed operators R(lambda) composed around each drift term.
[[nodiscard]] BackwardSolution solve_backward_smoothed(const BackwardConfig& config, const ForwardEnsemble& forward,
                                                       const Problem& problem, double lambda);

/// Direct backward sweep along one deterministic trajectory (Phi = 0).
[[nodiscard]] Matrix solve_backward_deterministic(const BackwardConfig& config, const Problem& problem,
                                                  const Matrix& states, std::size_t tau);

struct ResolventRow {
    double lambda = 0.0;
    /// E sup_i ||z*_i - z*_i(lambda)||^2_{D(A^delta)}
    double z_deviation = 0.0;
    /// E sum_i dt ||Phi_i - Phi_i(lambda)||^2_HS
    double phi_deviation = 0.0;
    double z_relative = 0.0;
    double phi_relative = 0.0;
};

struct ResolventTable {
    BackwardSolution reference;
    std::vector<ResolventRow> rows;
};

/// Deviation of the smoothed solutions from the unsmoothed one along `lambdas` (positive, increasing).
[[nodiscard]] ResolventTable solve_backward_resolvent(const BackwardConfig& config, const ForwardEnsemble& forward,
                                                      const Problem& problem, const std::vector<double>& lambdas);

/// E sup_i ||a_i - b_i||^2_{D(A^delta)} over paths, columns are steps.
[[nodiscard]] double mean_sup_sq(const SpectralOperator& op, double delta, const std::vector<Matrix>& a,
                                 const std::vector<Matrix>* b = nullptr);
/// E sum_i dt ||Phi_a - Phi_b||^2_{HS, D(A^delta)}.
[[nodiscard]] double phi_sq_distance(const SpectralOperator& op, double delta, const ForwardEnsemble& forward,
                                     const BackwardSolution& a, const BackwardSolution* b = nullptr);

}  // namespace gsmp

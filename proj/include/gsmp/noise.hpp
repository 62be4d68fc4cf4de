#pragma once

#include <cstddef>
#include <vector>

#include "gsmp/spectral_operator.hpp"

namespace gsmp {

/// K x J matrix of an operator Q^{1/2}H -> H written in the orthonormal
/// system {sqrt(mu_j) e_j}: column j holds the coefficients of M[sqrt(mu_j) e_j].
using HSOperator = Matrix;

/// Affine noise-to-state map y -> G(y) with covariance spectrum mu_1..mu_J.
///
/// Column j of G(y) is g_const.col(j) + g_lin[j] * y, i.e. g_lin[j](k,i) is
/// the coefficient g_lin[k][j][i].
class NoiseModel {
public:
    NoiseModel(std::vector<double> mu, Matrix g_const, std::vector<Matrix> g_lin, double alpha);

    /// G(y)[sqrt(mu_j) e_j] = sigma * y for every mode j.
    static NoiseModel diagonal_multiplicative(std::size_t K, std::vector<double> mu, double sigma, double alpha);
    /// G(y) = g_const for all y.
    static NoiseModel additive(Matrix g_const, std::vector<double> mu, double alpha);
    /// No noise at all (J = 1, mu = 0).
    static NoiseModel none(std::size_t K, double alpha);
    /// mu_j = 2^{-j}, diagonal multiplicative with strength sigma.
    static NoiseModel default_model(std::size_t K, std::size_t J, double sigma, double alpha);

    [[nodiscard]] std::size_t dim() const noexcept { return K_; }
    [[nodiscard]] std::size_t modes() const noexcept { return mu_.size(); }
    [[nodiscard]] const std::vector<double>& mu() const noexcept { return mu_; }
    [[nodiscard]] Vector sqrt_mu() const;
    [[nodiscard]] double trace_q() const noexcept;
    [[nodiscard]] const Matrix& g_const() const noexcept { return g_const_; }
    [[nodiscard]] const Matrix& g_lin(std::size_t j) const { return g_lin_.at(j); }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] bool has_linear_part() const noexcept { return linear_; }
    [[nodiscard]] bool is_zero() const noexcept;

    /// Full affine map M(y), K x J.
    [[nodiscard]] HSOperator apply(const Vector& y) const;
    /// Linear part only (the derivative of G), K x J.
    [[nodiscard]] HSOperator apply_linear(const Vector& z) const;
    /// (linear part)(z) * dw without materializing the K x J matrix.
    [[nodiscard]] Vector apply_linear_times(const Vector& z, const Vector& dw) const;
    /// Sum_j g_lin[j]^T Phi.col(j): the transpose contraction without weights.
    [[nodiscard]] Vector transpose_contract(const HSOperator& phi) const;

    /// Estimated constant with ||A^alpha G(y)||_HS <= C_G ||y||_H for the linear part.
    [[nodiscard]] double c_g() const noexcept { return c_g_; }
    void estimate_c_g(const SpectralOperator& op);

private:
    std::size_t K_;
    std::vector<double> mu_;
    Matrix g_const_;
    std::vector<Matrix> g_lin_;
    double alpha_;
    bool linear_ = false;
    double c_g_ = 0.0;
};

[[nodiscard]] HSOperator apply_noise_operator(const NoiseModel& model, const SpectralField& y);

/// sqrt(sum_{k,j} lambda_k^{2a} M[k][j]^2).
[[nodiscard]] double hs_norm(const SpectralOperator& op, const HSOperator& M, double a);
/// <A^a M1, A^a M2>_HS.
[[nodiscard]] double hs_inner(const SpectralOperator& op, const HSOperator& M1, const HSOperator& M2, double a);

/// G*(Phi) characterized by <A^alpha G(h), A^alpha Phi>_HS = <h, G*(Phi)>_H for the linear part of G.
[[nodiscard]] SpectralField apply_noise_adjoint(const NoiseModel& model, const SpectralOperator& op,
                                                const HSOperator& phi);

}  // namespace gsmp

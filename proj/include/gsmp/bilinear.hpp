#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsmp/exponents.hpp"
#include "gsmp/spectral_operator.hpp"

namespace gsmp {

enum class TensorKind { fourier2d, synthetic };

[[nodiscard]] std::string to_string(TensorKind kind);
[[nodiscard]] TensorKind tensor_kind_from_string(const std::string& s);

/// Galerkin representation T[i][j][k] = <B(e_i, e_j), e_k>_H of the convection term.
///
/// Besides the raw entries the tensor keeps the symmetrized layout
/// T[i][j][k] + T[j][i][k] that drives the linearized convection
/// z -> B(z,y) + B(y,z) and its adjoint.
class BilinearTensor {
public:
    /// `entries` has K^3 values in row-major (i,j,k) order.
    BilinearTensor(std::size_t K, std::vector<double> entries, TensorKind kind);

    /// Exact Galerkin tensor of the Helmholtz-projected convection on the
    /// periodic 2D box for the modes attached to `op` (requires mode metadata).
    static BilinearTensor fourier2d(const SpectralOperator& op);
    /// Gaussian entries times `scale`; with `skew` the entries satisfy T[i][j][k] = -T[i][k][j].
    static BilinearTensor synthetic(std::size_t K, std::uint64_t seed, double scale, bool skew);
    static BilinearTensor zero(std::size_t K);

    [[nodiscard]] std::size_t dim() const noexcept { return K_; }
    [[nodiscard]] TensorKind kind() const noexcept { return kind_; }
    [[nodiscard]] double entry(std::size_t i, std::size_t j, std::size_t k) const {
        return entries_[(i * K_ + j) * K_ + k];
    }
    [[nodiscard]] const std::vector<double>& entries() const noexcept { return entries_; }
    [[nodiscard]] bool is_zero() const noexcept { return zero_; }

    /// Coefficients of B(y,z).
    [[nodiscard]] Vector apply(const Vector& y, const Vector& z) const;
    /// Matrix of z -> B(z,y) + B(y,z) (K x K).
    [[nodiscard]] Matrix linearization(const Vector& y) const;
    /// L_y^T h without forming L_y.
    [[nodiscard]] Vector linearization_transpose(const Vector& y, const Vector& h) const;

    /// Boundedness constant of |A^{-delta} B(y,z)| <= M |A^alpha y| |A^alpha z|.
    [[nodiscard]] double m_tilde() const noexcept { return m_tilde_; }
    [[nodiscard]] double m_tilde_alpha() const noexcept { return m_alpha_; }
    [[nodiscard]] double m_tilde_delta() const noexcept { return m_delta_; }
    /// Estimates and stores the constant: random unit pairs followed by
    /// alternating singular-vector refinement from the best samples.
    void estimate_m_tilde(const SpectralOperator& op, const ExponentParams& params,
                          std::size_t samples = 10000, std::uint64_t seed = 7);
    void set_m_tilde(double value, double alpha, double delta) {
        m_tilde_ = value;
        m_alpha_ = alpha;
        m_delta_ = delta;
    }

    /// Perturbs the cached symmetrized layout only, so B stays correct while
    /// its adjoint no longer matches. Used as a negative control.
    void corrupt_adjoint_cache(double magnitude, std::uint64_t seed);

private:
    void build_layouts();
    /// Columns j of the K x K matrix z -> B(y, z).
    [[nodiscard]] Matrix left_matrix(const Vector& y) const;
    /// Columns i of the K x K matrix y -> B(y, z).
    [[nodiscard]] Matrix right_matrix(const Vector& z) const;

    std::size_t K_;
    std::vector<double> entries_;
    TensorKind kind_;
    bool zero_ = false;
    // (i*K + k, j) -> T[i][j][k]
    Matrix by_j_;
    // (i*K + k, j) -> T[i][j][k] + T[j][i][k]
    Matrix sym_;
    double m_tilde_ = 0.0;
    double m_alpha_ = 0.0;
    double m_delta_ = 0.0;
};

[[nodiscard]] SpectralField apply_bilinear(const BilinearTensor& tensor, const SpectralField& y,
                                           const SpectralField& z);

/// B*_delta(y, h) defined by <A^{-delta}[B(z,y)+B(y,z)], h> = <A^alpha z, A^alpha B*_delta(y,h)> for all z.
[[nodiscard]] SpectralField apply_bilinear_adjoint(const BilinearTensor& tensor, const SpectralOperator& op,
                                                   const ExponentParams& params, const SpectralField& y,
                                                   const SpectralField& h);

}  // namespace gsmp

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "gsmp/exponents.hpp"

namespace gsmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Coefficients of a velocity-type field in the eigenbasis of A.
struct SpectralField {
    Vector coeffs;

    SpectralField() = default;
    explicit SpectralField(Vector c) : coeffs(std::move(c)) {}
    static SpectralField zero(std::size_t K) { return SpectralField(Vector::Zero(static_cast<Eigen::Index>(K))); }
    static SpectralField unit(std::size_t K, std::size_t k) {
        auto f = zero(K);
        f.coeffs(static_cast<Eigen::Index>(k)) = 1.0;
        return f;
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(coeffs.size()); }

    SpectralField& operator+=(const SpectralField& o) { coeffs += o.coeffs; return *this; }
    SpectralField& operator-=(const SpectralField& o) { coeffs -= o.coeffs; return *this; }
    SpectralField& operator*=(double s) { coeffs *= s; return *this; }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
};

/// Wavevector label of a real Fourier mode; `cosine` selects cos(k.x) vs sin(k.x).
struct ModeLabel {
    int k1 = 0;
    int k2 = 0;
    bool cosine = true;
};

/// Diagonalized positive self-adjoint operator (Stokes-like) truncated to K modes.
class SpectralOperator {
public:
    /// Eigenvalues must be strictly positive and non-decreasing.
    explicit SpectralOperator(std::vector<double> eigenvalues,
                              std::optional<std::vector<ModeLabel>> mode_meta = std::nullopt);

    /// Synthetic spectrum lambda_k = k, k = 1..K.
    static SpectralOperator synthetic(std::size_t K);

    [[nodiscard]] std::size_t dim() const noexcept { return eigenvalues_.size(); }
    [[nodiscard]] const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    [[nodiscard]] const Vector& eigen_vector() const noexcept { return lambda_; }
    [[nodiscard]] double lambda_min() const noexcept { return eigenvalues_.front(); }
    [[nodiscard]] double lambda_max() const noexcept { return eigenvalues_.back(); }
    [[nodiscard]] const std::optional<std::vector<ModeLabel>>& mode_meta() const noexcept { return meta_; }

    /// Diagonal of A^a.
    [[nodiscard]] Vector power_weights(double a) const;
    /// Diagonal of e^{-At}.
    [[nodiscard]] Vector semigroup_weights(double t) const;
    /// Diagonal of R(lambda) = lambda (lambda + A)^{-1}.
    [[nodiscard]] Vector resolvent_weights(double lambda) const;

    /// sqrt(sum_k lambda_k^{2a} c_k^2), the D(A^a) norm.
    [[nodiscard]] double norm(double a, const Vector& c) const;
    [[nodiscard]] double norm(double a, const SpectralField& y) const { return norm(a, y.coeffs); }
    /// <A^a y, A^a z>_H.
    [[nodiscard]] double inner(double a, const Vector& y, const Vector& z) const;

    void check_dim(const Vector& c) const;

private:
    std::vector<double> eigenvalues_;
    Vector lambda_;
    std::optional<std::vector<ModeLabel>> meta_;
};

[[nodiscard]] SpectralField apply_fractional_power(const SpectralOperator& op, double a,
                                                   const SpectralField& y);
/// e^{-At} y; rejects t < 0.
[[nodiscard]] SpectralField apply_semigroup(const SpectralOperator& op, double t,
                                            const SpectralField& y);
/// R(lambda) y; rejects lambda <= 0.
[[nodiscard]] SpectralField apply_resolvent(const SpectralOperator& op, double lambda,
                                            const SpectralField& y);

/// Radial retraction onto the closed ball of radius m in D(A^alpha).
[[nodiscard]] SpectralField truncate_pi_m(const SpectralOperator& op, const SpectralField& y,
                                          double m, const ExponentParams& params);
/// In-place variant on raw coefficients; `alpha_weights` is the diagonal of A^alpha.
void truncate_in_place(Eigen::Ref<Vector> y, const Vector& alpha_weights, double m);

}  // namespace gsmp

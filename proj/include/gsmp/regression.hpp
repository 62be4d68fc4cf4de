#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gsmp/spectral_operator.hpp"

namespace gsmp {

enum class RegressionBasis { affine, quadratic };

[[nodiscard]] std::string to_string(RegressionBasis b);
[[nodiscard]] RegressionBasis regression_basis_from_string(const std::string& s);

/// Raw features of a state: its coefficients, plus the products y_k y_l (k <= l) for the quadratic basis.
[[nodiscard]] Vector state_features(RegressionBasis basis, const Vector& y);
[[nodiscard]] std::size_t feature_count(RegressionBasis basis, std::size_t K);

/// Ridge least-squares fit of several targets on standardized features with an intercept.
///
/// Features whose sample spread is negligible are dropped, so a degenerate
/// ensemble (a single path, a deterministic state) reduces to the sample mean.
struct LinearFit {
    std::vector<std::size_t> kept;  // indices of retained raw features
    Vector mean;                    // per retained feature
    Vector scale;                   // per retained feature
    Matrix coef;                    // (1 + kept) x targets
    bool empty = true;

    [[nodiscard]] std::size_t targets() const noexcept { return static_cast<std::size_t>(coef.cols()); }
    /// Design row [1, standardized features].
    [[nodiscard]] Vector design(const Vector& features) const;
    [[nodiscard]] Vector predict(const Vector& features) const;
    /// Prediction restricted to target columns [first, first + count).
    [[nodiscard]] Vector predict(const Vector& features, std::size_t first, std::size_t count) const;
};

/// `features` is n x q (one row per sample), `targets` n x t.
/// Throws RegressionError(step) if the normal equations cannot be solved or the data is not finite.
[[nodiscard]] LinearFit fit_regression(const Matrix& features, const Matrix& targets, double ridge, std::size_t step);

}  // namespace gsmp

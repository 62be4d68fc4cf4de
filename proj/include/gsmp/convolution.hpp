#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gsmp/noise.hpp"
#include "gsmp/wiener.hpp"

namespace gsmp {

/// Per-step integrand Phi_0..Phi_{N-1} of a stochastic integral.
///
/// Built either from deterministic data or from a callback that only sees
/// the increments strictly before the current step, so a non-adapted
/// integrand cannot be expressed.
class AdaptedIntegrand {
public:
    using Generator = std::function<HSOperator(std::size_t step, const Eigen::Ref<const Matrix>& past_dw)>;

    static AdaptedIntegrand deterministic(std::vector<HSOperator> values);
    static AdaptedIntegrand constant(const HSOperator& value, std::size_t N);
    static AdaptedIntegrand build(const WienerPath& path, const Generator& gen);

    [[nodiscard]] std::size_t steps() const noexcept { return values_.size(); }
    [[nodiscard]] const HSOperator& operator[](std::size_t i) const { return values_.at(i); }

private:
    explicit AdaptedIntegrand(std::vector<HSOperator> v) : values_(std::move(v)) {}
    std::vector<HSOperator> values_;
};

/// I_i = sum_{l<i} e^{-Lambda (t_i - t_{l+1})} Phi_l dW_l, i = 0..N.
[[nodiscard]] std::vector<SpectralField> stochastic_convolution(const SpectralOperator& op, const TimeGrid& grid,
                                                                const AdaptedIntegrand& integrand,
                                                                const WienerPath& path);
/// Same with raw nonnegative decay rates (lambda = 0 allowed).
[[nodiscard]] std::vector<SpectralField> stochastic_convolution(const Vector& rates, const TimeGrid& grid,
                                                                const AdaptedIntegrand& integrand,
                                                                const WienerPath& path);

/// I_tau(t_i) = sum_{l < min(i, tau)} e^{-Lambda (t_i - t_{l+1})} Phi_l dW_l.
[[nodiscard]] std::vector<SpectralField> stopped_convolution(const SpectralOperator& op, const TimeGrid& grid,
                                                             const AdaptedIntegrand& integrand,
                                                             const WienerPath& path, std::size_t tau_index);

/// Discrete semimartingale X_{n+1} = X_n + f_n dt + Phi_n dW_n.
struct Semimartingale {
    Vector initial;
    std::vector<Vector> drift;
    std::vector<HSOperator> diffusion;

    /// X_0..X_N along the path.
    [[nodiscard]] std::vector<Vector> realize(const WienerPath& path) const;
};

struct ItoCheckResult {
    /// max_n |LHS_n - RHS_n|
    double residual = 0.0;
    /// LHS_n - RHS_n for n = 0..N
    std::vector<double> difference;
};

/// Compares <X1_n, X2_n> against the product formula with the quadratic
/// covariation replaced by its compensator <Phi1, Phi2>_HS dt.
[[nodiscard]] ItoCheckResult ito_product_check(const Semimartingale& x1, const Semimartingale& x2,
                                               const WienerPath& path);

}  // namespace gsmp

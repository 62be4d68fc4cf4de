#pragma once

namespace gsmp {

/// Regularity exponents of the state, control, cost and convection spaces.
///
/// `alpha` is the state space D(A^alpha), `beta` the control space,
/// `gamma` the tracking norm and `delta` the smoothing used to bound the
/// convection term.
struct ExponentParams {
    double alpha = 0.45;
    double beta = 0.45;
    double gamma = 0.10;
    double delta = 0.35;
    int dim_n = 2;
    bool backward_mode = true;

    /// Throws ValidationError naming the first violated constraint.
    void validate() const;
    [[nodiscard]] bool valid() const noexcept;
};

}  // namespace gsmp

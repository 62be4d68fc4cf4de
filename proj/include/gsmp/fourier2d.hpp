#pragma once

#include <cstddef>
#include <vector>

#include "gsmp/spectral_operator.hpp"

namespace gsmp::fourier2d {

/// First K real divergence-free Fourier modes on the periodic box [0,2pi)^2,
/// ordered by |k|^2, then (k1,k2), cosine before sine. Each wavevector is taken
/// from the half plane k2 > 0 or (k2 == 0, k1 > 0).
[[nodiscard]] std::vector<ModeLabel> modes(std::size_t K);

/// The Stokes operator restricted to `modes(K)`: eigenvalue |k|^2 per mode.
[[nodiscard]] SpectralOperator stokes_operator(std::size_t K);

/// Largest |k1| or |k2| among the labels.
[[nodiscard]] int max_wavenumber(const std::vector<ModeLabel>& labels);

/// Velocity of basis mode `m` at x: unit vector perpendicular to k times
/// cos or sin(k.x), normalized to unit L^2 norm on the box.
struct Velocity {
    double u = 0.0;
    double v = 0.0;
};
[[nodiscard]] Velocity evaluate(const ModeLabel& m, double x, double y);

}  // namespace gsmp::fourier2d

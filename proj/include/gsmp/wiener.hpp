#pragma once

#include <cstddef>
#include <cstdint>

#include "gsmp/noise.hpp"

namespace gsmp {

/// Uniform grid t_i = i * T / N, i = 0..N.
struct TimeGrid {
    double T = 1.0;
    std::size_t N = 128;

    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps);

    [[nodiscard]] double dt() const noexcept { return T / static_cast<double>(N); }
    [[nodiscard]] double t(std::size_t i) const noexcept { return static_cast<double>(i) * dt(); }
    void validate() const;
    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.T == b.T && a.N == b.N; }
};

/// Counter-based stream derivation: splitmix64 applied to the master seed
/// combined with the path index. Every path gets an addressable stream.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;
[[nodiscard]] std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index) noexcept;

/// Increments of the truncated Karhunen-Loeve expansion W = sum_j sqrt(mu_j) w_j e_j.
struct WienerPath {
    TimeGrid grid;
    /// N x J standard Brownian increments w_j(t_{i+1}) - w_j(t_i), variance dt.
    /// Modes with mu_j = 0 are identically zero.
    Matrix dw;
    Vector sqrt_mu;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;

    [[nodiscard]] std::size_t steps() const noexcept { return static_cast<std::size_t>(dw.rows()); }
    [[nodiscard]] std::size_t modes() const noexcept { return static_cast<std::size_t>(dw.cols()); }
    /// Row i of dw as a column vector.
    [[nodiscard]] Vector standard(std::size_t i) const { return dw.row(static_cast<Eigen::Index>(i)).transpose(); }
    /// N x J increments of the coefficient processes, variance mu_j * dt.
    [[nodiscard]] Matrix increments() const { return dw * sqrt_mu.asDiagonal(); }
};

[[nodiscard]] WienerPath sample_wiener(const NoiseModel& model, const TimeGrid& grid, std::uint64_t seed,
                                       std::uint64_t path_index);
/// Same, for a bare covariance spectrum.
[[nodiscard]] WienerPath sample_wiener(const std::vector<double>& mu, const TimeGrid& grid, std::uint64_t seed,
                                       std::uint64_t path_index);

}  // namespace gsmp

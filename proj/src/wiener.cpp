#include "gsmp/wiener.hpp"

#include <cmath>
#include <random>

#include "gsmp/errors.hpp"

namespace gsmp {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : T(horizon), N(steps) { validate(); }

void TimeGrid::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("grid: horizon T must be positive");
    if (N < 1) throw ValidationError("grid: need N >= 1 steps");
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index) noexcept {
    return splitmix64(splitmix64(master) ^ (path_index * 0xD1B54A32D192ED03ULL + 1));
}

WienerPath sample_wiener(const std::vector<double>& mu, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t path_index) {
    grid.validate();
    const auto J = static_cast<Eigen::Index>(mu.size());
    const auto N = static_cast<Eigen::Index>(grid.N);
    WienerPath path;
    path.grid = grid;
    path.seed = seed;
    path.path_index = path_index;
    path.sqrt_mu.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        const double m = mu[static_cast<std::size_t>(j)];
        if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("sample_wiener: covariance eigenvalues must be finite and nonnegative");
        path.sqrt_mu(j) = std::sqrt(m);
    }
    path.dw.resize(N, J);
    std::mt19937_64 rng(path_seed(seed, path_index));
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(grid.dt());
    // step-major draw order so truncating N keeps the prefix of the stream
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < J; ++j) {
            const double x = normal(rng);
            path.dw(i, j) = path.sqrt_mu(j) == 0.0 ? 0.0 : sd * x;
        }
    return path;
}

WienerPath sample_wiener(const NoiseModel& model, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t path_index) {
    return sample_wiener(model.mu(), grid, seed, path_index);
}

}  // namespace gsmp

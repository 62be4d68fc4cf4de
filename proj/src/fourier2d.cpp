#include "gsmp/fourier2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "gsmp/errors.hpp"

namespace gsmp::fourier2d {

std::vector<ModeLabel> modes(std::size_t K) {
    if (K == 0) throw ValidationError("fourier2d: K must be positive");
    // Enough shells to hold K modes: a disc of radius r has ~pi r^2 lattice points.
    int r = 1;
    while (std::numbers::pi * r * r < static_cast<double>(K) + 8.0) ++r;
    std::vector<std::pair<int, int>> ks;
    for (int k1 = -r; k1 <= r; ++k1)
        for (int k2 = 0; k2 <= r; ++k2)
            if (k2 > 0 || k1 > 0) ks.emplace_back(k1, k2);
    std::sort(ks.begin(), ks.end(), [](const auto& a, const auto& b) {
        const int na = a.first * a.first + a.second * a.second;
        const int nb = b.first * b.first + b.second * b.second;
        return std::tie(na, a.first, a.second) < std::tie(nb, b.first, b.second);
    });
    std::vector<ModeLabel> out;
    out.reserve(K);
    for (const auto& [k1, k2] : ks) {
        for (bool c : {true, false}) {
            if (out.size() == K) return out;
            out.push_back({k1, k2, c});
        }
    }
    return out;
}

SpectralOperator stokes_operator(std::size_t K) {
    auto labels = modes(K);
    std::vector<double> ev;
    ev.reserve(K);
    for (const auto& m : labels) ev.push_back(static_cast<double>(m.k1 * m.k1 + m.k2 * m.k2));
    return SpectralOperator(std::move(ev), std::move(labels));
}

int max_wavenumber(const std::vector<ModeLabel>& labels) {
    int w = 0;
    for (const auto& m : labels) w = std::max({w, std::abs(m.k1), std::abs(m.k2)});
    return w;
}

Velocity evaluate(const ModeLabel& m, double x, double y) {
    const double kn = std::hypot(m.k1, m.k2);
    const double phase = m.k1 * x + m.k2 * y;
    const double amp = (m.cosine ? std::cos(phase) : std::sin(phase)) / (std::numbers::sqrt2 * std::numbers::pi);
    return {-m.k2 / kn * amp, m.k1 / kn * amp};
}

}  // namespace gsmp::fourier2d

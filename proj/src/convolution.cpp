#include "gsmp/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

AdaptedIntegrand AdaptedIntegrand::deterministic(std::vector<HSOperator> values) {
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i].rows() != values[0].rows() || values[i].cols() != values[0].cols())
            throw ValidationError("integrand: inconsistent shapes across steps");
    return AdaptedIntegrand(std::move(values));
}

AdaptedIntegrand AdaptedIntegrand::constant(const HSOperator& value, std::size_t N) {
    return AdaptedIntegrand(std::vector<HSOperator>(N, value));
}

AdaptedIntegrand AdaptedIntegrand::build(const WienerPath& path, const Generator& gen) {
    std::vector<HSOperator> v;
    v.reserve(path.steps());
    for (std::size_t i = 0; i < path.steps(); ++i)
        v.push_back(gen(i, path.dw.topRows(static_cast<Eigen::Index>(i))));
    return deterministic(std::move(v));
}

namespace {

void check_shapes(std::size_t K, const TimeGrid& grid, const AdaptedIntegrand& integrand, const WienerPath& path) {
    if (!(path.grid == grid)) throw ValidationError("convolution: path grid differs from requested grid");
    if (integrand.steps() != grid.N) throw ValidationError("convolution: integrand needs one value per step");
    for (std::size_t i = 0; i < integrand.steps(); ++i) {
        const auto& phi = integrand[i];
        if (static_cast<std::size_t>(phi.rows()) != K || static_cast<std::size_t>(phi.cols()) != path.modes())
            throw ValidationError("convolution: integrand must be K x J at every step");
    }
}

std::vector<SpectralField> convolve(const Vector& rates, const TimeGrid& grid, const AdaptedIntegrand& integrand,
                                    const WienerPath& path, std::size_t stop) {
    const auto K = static_cast<std::size_t>(rates.size());
    check_shapes(K, grid, integrand, path);
    const Vector decay = (-grid.dt() * rates.array()).exp().matrix();
    std::vector<SpectralField> out(grid.N + 1, SpectralField::zero(K));
    // I_{i+1} = e^{-Lambda dt} I_i + Phi_i dW_i, matching e^{-Lambda (t_{i+1} - t_{l+1})} per term.
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < grid.N; ++i) {
        acc = decay.cwiseProduct(acc);
        if (i < stop) acc.noalias() += integrand[i] * path.standard(i);
        out[i + 1].coeffs = acc;
    }
    return out;
}

}  // namespace

std::vector<SpectralField> stochastic_convolution(const Vector& rates, const TimeGrid& grid,
                                                  const AdaptedIntegrand& integrand, const WienerPath& path) {
    if ((rates.array() < 0.0).any()) throw ValidationError("convolution: decay rates must be nonnegative");
    return convolve(rates, grid, integrand, path, grid.N);
}

std::vector<SpectralField> stochastic_convolution(const SpectralOperator& op, const TimeGrid& grid,
                                                  const AdaptedIntegrand& integrand, const WienerPath& path) {
    return convolve(op.eigen_vector(), grid, integrand, path, grid.N);
}

std::vector<SpectralField> stopped_convolution(const SpectralOperator& op, const TimeGrid& grid,
                                               const AdaptedIntegrand& integrand, const WienerPath& path,
                                               std::size_t tau_index) {
    if (tau_index > grid.N) throw ValidationError("stopped convolution: tau index beyond the grid");
    return convolve(op.eigen_vector(), grid, integrand, path, tau_index);
}

std::vector<Vector> Semimartingale::realize(const WienerPath& path) const {
    const std::size_t N = path.steps();
    if (drift.size() != N || diffusion.size() != N)
        throw ValidationError("semimartingale: drift and diffusion need one value per step");
    const double dt = path.grid.dt();
    std::vector<Vector> x(N + 1);
    x[0] = initial;
    for (std::size_t i = 0; i < N; ++i) {
        if (drift[i].size() != initial.size() || diffusion[i].rows() != initial.size() ||
            static_cast<std::size_t>(diffusion[i].cols()) != path.modes())
            throw ValidationError("semimartingale: inconsistent dimensions at step " + std::to_string(i));
        x[i + 1] = x[i] + dt * drift[i] + diffusion[i] * path.standard(i);
    }
    return x;
}

ItoCheckResult ito_product_check(const Semimartingale& x1, const Semimartingale& x2, const WienerPath& path) {
    if (x1.initial.size() != x2.initial.size()) throw ValidationError("ito check: state dimensions differ");
    if (x1.drift.size() != x2.drift.size()) throw ValidationError("ito check: grid mismatch between processes");
    const auto X1 = x1.realize(path);
    const auto X2 = x2.realize(path);
    const double dt = path.grid.dt();
    ItoCheckResult res;
    res.difference.resize(X1.size());
    double rhs = X1[0].dot(X2[0]);
    res.difference[0] = 0.0;
    for (std::size_t l = 0; l + 1 < X1.size(); ++l) {
        const Vector dw = path.standard(l);
        rhs += dt * (X1[l].dot(x2.drift[l]) + X2[l].dot(x1.drift[l]));
        rhs += X1[l].dot(x2.diffusion[l] * dw) + X2[l].dot(x1.diffusion[l] * dw);
        rhs += dt * x1.diffusion[l].cwiseProduct(x2.diffusion[l]).sum();
        const double d = X1[l + 1].dot(X2[l + 1]) - rhs;
        res.difference[l + 1] = d;
        res.residual = std::max(res.residual, std::abs(d));
    }
    return res;
}

}  // namespace gsmp

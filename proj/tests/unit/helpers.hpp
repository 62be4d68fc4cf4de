#pragma once

#include <random>

#include "gsmp/backward.hpp"
#include "gsmp/bilinear.hpp"
#include "gsmp/control.hpp"
#include "gsmp/forward.hpp"
#include "gsmp/fourier2d.hpp"
#include "gsmp/noise.hpp"
#include "gsmp/spectral_operator.hpp"
#include "gsmp/wiener.hpp"

namespace testutil {

using namespace gsmp;

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
}

/// One-mode linear problem with no convection; the scalar oracles are built on it.
inline Problem scalar_problem(double eigenvalue, double T, std::size_t N, NoiseModel noise, double xi = 0.0,
                              double control_gain = 1.0) {
    ForwardConfig fc;
    fc.grid = TimeGrid(T, N);
    fc.m_level = 1e9;
    fc.xi = Vector::Constant(1, xi);
    fc.control_map = Matrix::Constant(1, 1, control_gain);
    return Problem{SpectralOperator({eigenvalue}), BilinearTensor::zero(1), std::move(noise), fc};
}

/// Small synthetic problem with convection and multiplicative noise.
inline Problem synthetic_problem(std::size_t K, std::size_t N, double sigma, double m_level = 10.0,
                                 double tensor_scale = 0.2, std::size_t J = 3) {
    ForwardConfig fc;
    fc.grid = TimeGrid(1.0, N);
    fc.m_level = m_level;
    auto op = SpectralOperator::synthetic(K);
    fc.xi = default_initial_state(op, fc.params.alpha, 1.0);
    fc.control_map = Matrix::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    auto tensor = BilinearTensor::synthetic(K, 3, tensor_scale, true);
    tensor.estimate_m_tilde(op, fc.params, 2000);
    auto noise = sigma == 0.0 ? NoiseModel::none(K, fc.params.alpha)
                              : NoiseModel::default_model(K, J, sigma, fc.params.alpha);
    return Problem{std::move(op), std::move(tensor), std::move(noise), fc};
}

inline BackwardConfig backward_config(const Problem& problem, Matrix y_d) {
    BackwardConfig bc;
    bc.params = problem.params();
    bc.grid = problem.grid();
    bc.y_d = std::move(y_d);
    return bc;
}

inline BackwardConfig backward_config(const Problem& problem) {
    return backward_config(problem, Matrix::Zero(static_cast<Eigen::Index>(problem.grid().N),
                                                 static_cast<Eigen::Index>(problem.dim())));
}

}  // namespace testutil

#include "gsmp/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

NoiseModel::NoiseModel(std::vector<double> mu, Matrix g_const, std::vector<Matrix> g_lin, double alpha)
    : K_(static_cast<std::size_t>(g_const.rows())), mu_(std::move(mu)), g_const_(std::move(g_const)),
      g_lin_(std::move(g_lin)), alpha_(alpha) {
    if (mu_.empty()) throw ValidationError("noise: need at least one noise mode");
    if (K_ == 0) throw ValidationError("noise: state dimension must be positive");
    for (double m : mu_)
        if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("noise: covariance eigenvalues must be nonnegative");
    if (static_cast<std::size_t>(g_const_.cols()) != mu_.size())
        throw ValidationError("noise: g_const must be K x J");
    if (g_lin_.empty()) {
        g_lin_.assign(mu_.size(), Matrix::Zero(g_const_.rows(), g_const_.rows()));
    }
    if (g_lin_.size() != mu_.size()) throw ValidationError("noise: g_lin needs one K x K block per mode");
    for (const auto& g : g_lin_) {
        if (static_cast<std::size_t>(g.rows()) != K_ || static_cast<std::size_t>(g.cols()) != K_)
            throw ValidationError("noise: g_lin blocks must be K x K");
        if (!g.isZero(0.0)) linear_ = true;
    }
}

NoiseModel NoiseModel::diagonal_multiplicative(std::size_t K, std::vector<double> mu, double sigma, double alpha) {
    const auto k = static_cast<Eigen::Index>(K);
    std::vector<Matrix> lin(mu.size(), sigma * Matrix::Identity(k, k));
    Matrix c = Matrix::Zero(k, static_cast<Eigen::Index>(mu.size()));
    return NoiseModel(std::move(mu), std::move(c), std::move(lin), alpha);
}

NoiseModel NoiseModel::additive(Matrix g_const, std::vector<double> mu, double alpha) {
    return NoiseModel(std::move(mu), std::move(g_const), {}, alpha);
}

NoiseModel NoiseModel::none(std::size_t K, double alpha) {
    return NoiseModel({0.0}, Matrix::Zero(static_cast<Eigen::Index>(K), 1), {}, alpha);
}

NoiseModel NoiseModel::default_model(std::size_t K, std::size_t J, double sigma, double alpha) {
    std::vector<double> mu(J);
    for (std::size_t j = 0; j < J; ++j) mu[j] = std::ldexp(1.0, -static_cast<int>(j + 1));
    return diagonal_multiplicative(K, std::move(mu), sigma, alpha);
}

Vector NoiseModel::sqrt_mu() const {
    Vector s(static_cast<Eigen::Index>(mu_.size()));
    for (std::size_t j = 0; j < mu_.size(); ++j) s(static_cast<Eigen::Index>(j)) = std::sqrt(mu_[j]);
    return s;
}

double NoiseModel::trace_q() const noexcept { return std::accumulate(mu_.begin(), mu_.end(), 0.0); }

bool NoiseModel::is_zero() const noexcept {
    const bool no_cov = std::all_of(mu_.begin(), mu_.end(), [](double m) { return m == 0.0; });
    return no_cov || (!linear_ && g_const_.isZero(0.0));
}

HSOperator NoiseModel::apply(const Vector& y) const {
    HSOperator m = apply_linear(y);
    m += g_const_;
    return m;
}

HSOperator NoiseModel::apply_linear(const Vector& z) const {
    if (static_cast<std::size_t>(z.size()) != K_) throw ValidationError("noise: field dimension mismatch");
    HSOperator m = HSOperator::Zero(static_cast<Eigen::Index>(K_), static_cast<Eigen::Index>(mu_.size()));
    if (!linear_) return m;
    for (std::size_t j = 0; j < mu_.size(); ++j) m.col(static_cast<Eigen::Index>(j)).noalias() = g_lin_[j] * z;
    return m;
}

Vector NoiseModel::apply_linear_times(const Vector& z, const Vector& dw) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(K_));
    if (!linear_) return out;
    for (std::size_t j = 0; j < mu_.size(); ++j) {
        const double w = dw(static_cast<Eigen::Index>(j));
        if (w != 0.0) out.noalias() += w * (g_lin_[j] * z);
    }
    return out;
}

Vector NoiseModel::transpose_contract(const HSOperator& phi) const {
    if (static_cast<std::size_t>(phi.rows()) != K_ || static_cast<std::size_t>(phi.cols()) != mu_.size())
        throw ValidationError("noise adjoint: HS operator must be K x J");
    Vector out = Vector::Zero(static_cast<Eigen::Index>(K_));
    if (!linear_) return out;
    for (std::size_t j = 0; j < mu_.size(); ++j)
        out.noalias() += g_lin_[j].transpose() * phi.col(static_cast<Eigen::Index>(j));
    return out;
}

void NoiseModel::estimate_c_g(const SpectralOperator& op) {
    if (op.dim() != K_) throw ValidationError("noise: operator dimension mismatch");
    const auto K = static_cast<Eigen::Index>(K_);
    const auto J = static_cast<Eigen::Index>(mu_.size());
    const Vector w = op.power_weights(alpha_);
    // ||A^alpha G(y)||_HS is the Euclidean norm of the stacked (J*K) x K map.
    Matrix stacked(J * K, K);
    for (Eigen::Index j = 0; j < J; ++j) stacked.middleRows(j * K, K) = w.asDiagonal() * g_lin_[static_cast<std::size_t>(j)];
    Eigen::JacobiSVD<Matrix> svd(stacked);
    c_g_ = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

HSOperator apply_noise_operator(const NoiseModel& model, const SpectralField& y) { return model.apply(y.coeffs); }

double hs_norm(const SpectralOperator& op, const HSOperator& M, double a) {
    if (static_cast<std::size_t>(M.rows()) != op.dim()) throw ValidationError("hs_norm: row count differs from K");
    return (op.power_weights(a).asDiagonal() * M).norm();
}

double hs_inner(const SpectralOperator& op, const HSOperator& M1, const HSOperator& M2, double a) {
    if (M1.rows() != M2.rows() || M1.cols() != M2.cols()) throw ValidationError("hs_inner: shape mismatch");
    if (static_cast<std::size_t>(M1.rows()) != op.dim()) throw ValidationError("hs_inner: row count differs from K");
    const Vector w = op.power_weights(2.0 * a);
    return (w.asDiagonal() * M1).cwiseProduct(M2).sum();
}

SpectralField apply_noise_adjoint(const NoiseModel& model, const SpectralOperator& op, const HSOperator& phi) {
    if (model.dim() != op.dim()) throw ValidationError("noise adjoint: operator dimension mismatch");
    if (static_cast<std::size_t>(phi.rows()) != op.dim()) throw ValidationError("noise adjoint: HS operator must be K x J");
    const Vector w = op.power_weights(2.0 * model.alpha());
    return SpectralField(model.transpose_contract(w.asDiagonal() * phi));
}

}  // namespace gsmp

#include "gsmp/spectral_operator.hpp"

#include <cmath>
#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

SpectralOperator::SpectralOperator(std::vector<double> eigenvalues,
                                   std::optional<std::vector<ModeLabel>> mode_meta)
    : eigenvalues_(std::move(eigenvalues)), meta_(std::move(mode_meta)) {
    if (eigenvalues_.empty()) throw ValidationError("operator: need at least one eigenvalue");
    for (std::size_t k = 0; k < eigenvalues_.size(); ++k) {
        if (!(eigenvalues_[k] > 0.0) || !std::isfinite(eigenvalues_[k]))
            throw ValidationError("operator: eigenvalue " + std::to_string(k) + " is not positive");
        if (k > 0 && eigenvalues_[k] < eigenvalues_[k - 1])
            throw ValidationError("operator: eigenvalues must be non-decreasing");
    }
    if (meta_ && meta_->size() != eigenvalues_.size())
        throw ValidationError("operator: mode metadata length differs from K");
    lambda_ = Eigen::Map<const Vector>(eigenvalues_.data(), static_cast<Eigen::Index>(eigenvalues_.size()));
}

SpectralOperator SpectralOperator::synthetic(std::size_t K) {
    std::vector<double> ev(K);
    for (std::size_t k = 0; k < K; ++k) ev[k] = static_cast<double>(k + 1);
    return SpectralOperator(std::move(ev));
}

Vector SpectralOperator::power_weights(double a) const {
    if (a == 0.0) return Vector::Ones(lambda_.size());
    return lambda_.array().pow(a).matrix();
}

Vector SpectralOperator::semigroup_weights(double t) const {
    if (t < 0.0) throw ValidationError("semigroup: negative time");
    return (-t * lambda_.array()).exp().matrix();
}

Vector SpectralOperator::resolvent_weights(double lambda) const {
    if (!(lambda > 0.0)) throw ValidationError("resolvent: lambda must be positive");
    return (lambda / (lambda + lambda_.array())).matrix();
}

void SpectralOperator::check_dim(const Vector& c) const {
    if (static_cast<std::size_t>(c.size()) != dim())
        throw ValidationError("field has " + std::to_string(c.size()) + " coefficients, operator has " +
                              std::to_string(dim()));
}

double SpectralOperator::norm(double a, const Vector& c) const {
    check_dim(c);
    return std::sqrt(inner(a, c, c));
}

double SpectralOperator::inner(double a, const Vector& y, const Vector& z) const {
    check_dim(y);
    check_dim(z);
    if (a == 0.0) return y.dot(z);
    return (lambda_.array().pow(2.0 * a) * y.array() * z.array()).sum();
}

SpectralField apply_fractional_power(const SpectralOperator& op, double a, const SpectralField& y) {
    op.check_dim(y.coeffs);
    return SpectralField(op.power_weights(a).cwiseProduct(y.coeffs));
}

SpectralField apply_semigroup(const SpectralOperator& op, double t, const SpectralField& y) {
    op.check_dim(y.coeffs);
    return SpectralField(op.semigroup_weights(t).cwiseProduct(y.coeffs));
}

SpectralField apply_resolvent(const SpectralOperator& op, double lambda, const SpectralField& y) {
    op.check_dim(y.coeffs);
    return SpectralField(op.resolvent_weights(lambda).cwiseProduct(y.coeffs));
}

void truncate_in_place(Eigen::Ref<Vector> y, const Vector& alpha_weights, double m) {
    const double n = alpha_weights.cwiseProduct(y).norm();
    if (n > m) y *= m / n;
}

SpectralField truncate_pi_m(const SpectralOperator& op, const SpectralField& y, double m,
                            const ExponentParams& params) {
    if (!(m > 0.0)) throw ValidationError("pi_m: radius must be positive");
    op.check_dim(y.coeffs);
    SpectralField out = y;
    truncate_in_place(out.coeffs, op.power_weights(params.alpha), m);
    return out;
}

}  // namespace gsmp

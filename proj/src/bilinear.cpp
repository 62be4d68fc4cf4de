#include "gsmp/bilinear.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gsmp/errors.hpp"
#include "gsmp/fourier2d.hpp"

namespace gsmp {

std::string to_string(TensorKind kind) {
    return kind == TensorKind::fourier2d ? "fourier2d" : "synthetic";
}

TensorKind tensor_kind_from_string(const std::string& s) {
    if (s == "fourier2d") return TensorKind::fourier2d;
    if (s == "synthetic") return TensorKind::synthetic;
    throw ValidationError("unknown tensor instantiation '" + s + "'");
}

BilinearTensor::BilinearTensor(std::size_t K, std::vector<double> entries, TensorKind kind)
    : K_(K), entries_(std::move(entries)), kind_(kind) {
    if (K_ == 0) throw ValidationError("tensor: K must be positive");
    if (entries_.size() != K_ * K_ * K_) throw ValidationError("tensor: expected K^3 entries");
    zero_ = std::all_of(entries_.begin(), entries_.end(), [](double v) { return v == 0.0; });
    build_layouts();
}

void BilinearTensor::build_layouts() {
    const auto K = static_cast<Eigen::Index>(K_);
    by_j_.resize(K * K, K);
    sym_.resize(K * K, K);
    for (std::size_t i = 0; i < K_; ++i)
        for (std::size_t j = 0; j < K_; ++j)
            for (std::size_t k = 0; k < K_; ++k) {
                const auto row = static_cast<Eigen::Index>(i * K_ + k);
                by_j_(row, static_cast<Eigen::Index>(j)) = entry(i, j, k);
                sym_(row, static_cast<Eigen::Index>(j)) = entry(i, j, k) + entry(j, i, k);
            }
}

BilinearTensor BilinearTensor::zero(std::size_t K) {
    return BilinearTensor(K, std::vector<double>(K * K * K, 0.0), TensorKind::synthetic);
}

BilinearTensor BilinearTensor::synthetic(std::size_t K, std::uint64_t seed, double scale, bool skew) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> raw(K * K * K);
    for (auto& v : raw) v = scale * normal(rng);
    if (!skew) return BilinearTensor(K, std::move(raw), TensorKind::synthetic);
    std::vector<double> t(K * K * K);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j)
            for (std::size_t k = 0; k < K; ++k)
                t[(i * K + j) * K + k] = (raw[(i * K + j) * K + k] - raw[(i * K + k) * K + j]) / std::numbers::sqrt2;
    return BilinearTensor(K, std::move(t), TensorKind::synthetic);
}

BilinearTensor BilinearTensor::fourier2d(const SpectralOperator& op) {
    if (!op.mode_meta()) throw ValidationError("tensor: fourier2d needs mode metadata on the operator");
    const auto& modes = *op.mode_meta();
    const std::size_t K = modes.size();
    // Products of three modes have wavenumbers up to 3*kmax per axis; a grid
    // with more points than that integrates them exactly (no aliasing).
    const int n = 3 * fourier2d::max_wavenumber(modes) + 2;
    const double h = 2.0 * std::numbers::pi / n;
    const double cell = h * h;
    const std::size_t P = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

    // phi_m(x) and phi'_m(x) with e_m = nhat_m phi_m, grad phi_m = k_m phi'_m.
    Matrix phi(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(K));
    Matrix dphi(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(K));
    const double norm = 1.0 / (std::numbers::sqrt2 * std::numbers::pi);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const auto p = static_cast<Eigen::Index>(a * n + b);
            for (std::size_t m = 0; m < K; ++m) {
                const double phase = modes[m].k1 * (a * h) + modes[m].k2 * (b * h);
                const auto mi = static_cast<Eigen::Index>(m);
                phi(p, mi) = norm * (modes[m].cosine ? std::cos(phase) : std::sin(phase));
                dphi(p, mi) = norm * (modes[m].cosine ? -std::sin(phase) : std::cos(phase));
            }
        }
    struct V2 {
        double x, y;
    };
    std::vector<V2> nhat(K), kvec(K);
    for (std::size_t m = 0; m < K; ++m) {
        const double kn = std::hypot(modes[m].k1, modes[m].k2);
        nhat[m] = {-modes[m].k2 / kn, modes[m].k1 / kn};
        kvec[m] = {static_cast<double>(modes[m].k1), static_cast<double>(modes[m].k2)};
    }
    // (e_i . grad) e_j = nhat_j (nhat_i . k_j) phi_i phi'_j, paired with e_k = nhat_k phi_k.
    std::vector<double> t(K * K * K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) {
            const double adv = nhat[i].x * kvec[j].x + nhat[i].y * kvec[j].y;
            if (adv == 0.0) continue;
            const Vector prod = phi.col(static_cast<Eigen::Index>(i)).cwiseProduct(dphi.col(static_cast<Eigen::Index>(j)));
            for (std::size_t k = 0; k < K; ++k) {
                const double dir = nhat[j].x * nhat[k].x + nhat[j].y * nhat[k].y;
                if (dir == 0.0) continue;
                const double integral = prod.dot(phi.col(static_cast<Eigen::Index>(k))) * cell;
                double v = adv * dir * integral;
                if (std::abs(v) < 1e-14) v = 0.0;
                t[(i * K + j) * K + k] = v;
            }
        }
    return BilinearTensor(K, std::move(t), TensorKind::fourier2d);
}

Matrix BilinearTensor::left_matrix(const Vector& y) const {
    // B(y, z) = sum_j z_j sum_i y_i T[i][j][.]
    const auto K = static_cast<Eigen::Index>(K_);
    Matrix out = Matrix::Zero(K, K);
    for (Eigen::Index i = 0; i < K; ++i) {
        if (y(i) == 0.0) continue;
        out.noalias() += y(i) * by_j_.middleRows(i * K, K);
    }
    return out;
}

Matrix BilinearTensor::right_matrix(const Vector& z) const {
    // B(y, z) = sum_i y_i (sum_j z_j T[i][j][.])
    const auto K = static_cast<Eigen::Index>(K_);
    const Vector v = by_j_ * z;
    return Eigen::Map<const Matrix>(v.data(), K, K);
}

Vector BilinearTensor::apply(const Vector& y, const Vector& z) const {
    if (static_cast<std::size_t>(y.size()) != K_ || static_cast<std::size_t>(z.size()) != K_)
        throw ValidationError("bilinear: field dimension does not match tensor");
    if (zero_) return Vector::Zero(static_cast<Eigen::Index>(K_));
    return right_matrix(z) * y;
}

Matrix BilinearTensor::linearization(const Vector& y) const {
    if (static_cast<std::size_t>(y.size()) != K_) throw ValidationError("bilinear: field dimension does not match tensor");
    const auto K = static_cast<Eigen::Index>(K_);
    if (zero_) return Matrix::Zero(K, K);
    const Vector v = sym_ * y;
    return Eigen::Map<const Matrix>(v.data(), K, K);
}

Vector BilinearTensor::linearization_transpose(const Vector& y, const Vector& h) const {
    if (static_cast<std::size_t>(y.size()) != K_ || static_cast<std::size_t>(h.size()) != K_)
        throw ValidationError("bilinear: field dimension does not match tensor");
    const auto K = static_cast<Eigen::Index>(K_);
    if (zero_) return Vector::Zero(K);
    const Vector v = sym_ * y;
    return Eigen::Map<const Matrix>(v.data(), K, K).transpose() * h;
}

void BilinearTensor::estimate_m_tilde(const SpectralOperator& op, const ExponentParams& params,
                                      std::size_t samples, std::uint64_t seed) {
    if (op.dim() != K_) throw ValidationError("tensor: operator dimension mismatch");
    m_alpha_ = params.alpha;
    m_delta_ = params.delta;
    if (zero_) {
        m_tilde_ = 0.0;
        return;
    }
    const Vector inv_a = op.power_weights(-params.alpha);
    const Vector inv_d = op.power_weights(-params.delta);
    const auto K = static_cast<Eigen::Index>(K_);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;

    // Work in y' = A^alpha y, z' = A^alpha z so the ratio is |A^{-delta} B(A^{-a} y', A^{-a} z')| / (|y'| |z'|).
    auto ratio = [&](const Vector& yp, const Vector& zp) {
        const Vector b = inv_d.cwiseProduct(apply(inv_a.cwiseProduct(yp), inv_a.cwiseProduct(zp)));
        return b.norm() / (yp.norm() * zp.norm());
    };
    struct Sample {
        double r;
        Vector y, z;
    };
    std::vector<Sample> best;
    const std::size_t keep = 8;
    for (std::size_t s = 0; s < samples; ++s) {
        Vector yp(K), zp(K);
        for (Eigen::Index k = 0; k < K; ++k) yp(k) = normal(rng);
        for (Eigen::Index k = 0; k < K; ++k) zp(k) = normal(rng);
        const double r = ratio(yp, zp);
        if (best.size() < keep || r > best.back().r) {
            best.push_back({r, yp, zp});
            std::sort(best.begin(), best.end(), [](const Sample& a, const Sample& b) { return a.r > b.r; });
            if (best.size() > keep) best.pop_back();
        }
    }
    double m = best.empty() ? 0.0 : best.front().r;
    for (auto& s : best) {
        Vector yp = s.y.normalized(), zp = s.z.normalized();
        double prev = 0.0;
        for (int it = 0; it < 200; ++it) {
            // maximize over z' for fixed y', then over y' for fixed z'
            Matrix Bz = inv_d.asDiagonal() * left_matrix(inv_a.cwiseProduct(yp)) * inv_a.asDiagonal();
            Eigen::JacobiSVD<Matrix> svd_z(Bz, Eigen::ComputeFullV);
            zp = svd_z.matrixV().col(0);
            Matrix By = inv_d.asDiagonal() * right_matrix(inv_a.cwiseProduct(zp)) * inv_a.asDiagonal();
            Eigen::JacobiSVD<Matrix> svd_y(By, Eigen::ComputeFullV);
            yp = svd_y.matrixV().col(0);
            const double r = svd_y.singularValues()(0);
            if (std::abs(r - prev) <= 1e-14 * r) break;
            prev = r;
        }
        m = std::max(m, ratio(yp, zp));
    }
    m_tilde_ = m;
}

void BilinearTensor::corrupt_adjoint_cache(double magnitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (Eigen::Index c = 0; c < sym_.cols(); ++c)
        for (Eigen::Index r = 0; r < sym_.rows(); ++r) sym_(r, c) += magnitude * normal(rng);
}

SpectralField apply_bilinear(const BilinearTensor& tensor, const SpectralField& y, const SpectralField& z) {
    return SpectralField(tensor.apply(y.coeffs, z.coeffs));
}

SpectralField apply_bilinear_adjoint(const BilinearTensor& tensor, const SpectralOperator& op,
                                     const ExponentParams& params, const SpectralField& y,
                                     const SpectralField& h) {
    op.check_dim(y.coeffs);
    op.check_dim(h.coeffs);
    if (tensor.dim() != op.dim()) throw ValidationError("bilinear adjoint: tensor/operator dimension mismatch");
    const Vector hd = op.power_weights(-params.delta).cwiseProduct(h.coeffs);
    return SpectralField(op.power_weights(-2.0 * params.alpha).cwiseProduct(tensor.linearization_transpose(y.coeffs, hd)));
}

}  // namespace gsmp

#include "gsmp/regression.hpp"

#include <cmath>

#include "gsmp/errors.hpp"

namespace gsmp {

std::string to_string(RegressionBasis b) { return b == RegressionBasis::affine ? "affine" : "quadratic"; }

RegressionBasis regression_basis_from_string(const std::string& s) {
    if (s == "affine") return RegressionBasis::affine;
    if (s == "quadratic") return RegressionBasis::quadratic;
    throw ValidationError("unknown regression basis '" + s + "'");
}

std::size_t feature_count(RegressionBasis basis, std::size_t K) {
    return basis == RegressionBasis::affine ? K : K + K * (K + 1) / 2;
}

Vector state_features(RegressionBasis basis, const Vector& y) {
    if (basis == RegressionBasis::affine) return y;
    const auto K = y.size();
    Vector f(static_cast<Eigen::Index>(feature_count(basis, static_cast<std::size_t>(K))));
    f.head(K) = y;
    Eigen::Index c = K;
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = k; l < K; ++l) f(c++) = y(k) * y(l);
    return f;
}

Vector LinearFit::design(const Vector& features) const {
    Vector d(static_cast<Eigen::Index>(kept.size() + 1));
    d(0) = 1.0;
    for (std::size_t q = 0; q < kept.size(); ++q) {
        const auto qi = static_cast<Eigen::Index>(q);
        d(qi + 1) = (features(static_cast<Eigen::Index>(kept[q])) - mean(qi)) / scale(qi);
    }
    return d;
}

Vector LinearFit::predict(const Vector& features) const {
    if (empty) return Vector::Zero(coef.cols());
    return coef.transpose() * design(features);
}

Vector LinearFit::predict(const Vector& features, std::size_t first, std::size_t count) const {
    if (empty) return Vector::Zero(static_cast<Eigen::Index>(count));
    return coef.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)).transpose() *
           design(features);
}

LinearFit fit_regression(const Matrix& features, const Matrix& targets, double ridge, std::size_t step) {
    if (features.rows() != targets.rows()) throw ValidationError("regression: feature and target row counts differ");
    const auto n = features.rows();
    LinearFit fit;
    if (n == 0) return fit;
    if (!features.allFinite() || !targets.allFinite()) throw RegressionError(step);
    const double inv_n = 1.0 / static_cast<double>(n);

    const Vector mean_all = features.colwise().mean().transpose();
    std::vector<double> means, scales;
    for (Eigen::Index q = 0; q < features.cols(); ++q) {
        const double var = (features.col(q).array() - mean_all(q)).square().sum() * inv_n;
        const double sd = std::sqrt(var);
        if (sd > 1e-12 * (1.0 + std::abs(mean_all(q)))) {
            fit.kept.push_back(static_cast<std::size_t>(q));
            means.push_back(mean_all(q));
            scales.push_back(sd);
        }
    }
    const auto p = static_cast<Eigen::Index>(fit.kept.size());
    fit.mean = Eigen::Map<const Vector>(means.data(), p);
    fit.scale = Eigen::Map<const Vector>(scales.data(), p);

    Matrix D(n, p + 1);
    D.col(0).setOnes();
    for (Eigen::Index q = 0; q < p; ++q)
        D.col(q + 1) = (features.col(static_cast<Eigen::Index>(fit.kept[static_cast<std::size_t>(q)])).array() - fit.mean(q)) / fit.scale(q);

    Matrix G = Matrix::Zero(p + 1, p + 1);
    G.selfadjointView<Eigen::Lower>().rankUpdate(D.transpose(), inv_n);
    G = G.selfadjointView<Eigen::Lower>();
    for (Eigen::Index q = 1; q <= p; ++q) G(q, q) += ridge;
    const Matrix rhs = inv_n * (D.transpose() * targets);
    Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw RegressionError(step);
    const Vector pivots = ldlt.vectorD().cwiseAbs();
    if (pivots.minCoeff() <= 1e-13 * pivots.maxCoeff()) throw RegressionError(step);
    fit.coef = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !fit.coef.allFinite()) throw RegressionError(step);
    fit.empty = false;
    return fit;
}

}  // namespace gsmp

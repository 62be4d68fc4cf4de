#include "gsmp/backward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

void BackwardConfig::validate(std::size_t K) const {
    ExponentParams p = params;
    p.backward_mode = true;
    p.validate();
    grid.validate();
    if (static_cast<std::size_t>(y_d.rows()) != grid.N || static_cast<std::size_t>(y_d.cols()) != K)
        throw ValidationError("target.y_d must be N x K");
    if (!y_d.allFinite()) throw ValidationError("target.y_d must be finite");
    if (picard_max == 0) throw ValidationError("backward.picard_max must be positive");
    if (!(picard_tol >= 0.0)) throw ValidationError("backward.picard_tol must be nonnegative");
    if (!(ridge >= 0.0)) throw ValidationError("backward.ridge must be nonnegative");
}

HSOperator BackwardSolution::phi(const ForwardEnsemble& forward, std::size_t p, std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(K);
    const auto j = static_cast<Eigen::Index>(J);
    if (i >= grid.N || i >= tau_index.at(p)) return HSOperator::Zero(k, j);
    const auto& fit = regression_coeffs.at(i);
    const Vector f = state_features(basis, forward.states.at(p).col(static_cast<Eigen::Index>(i)));
    const Vector v = fit.predict(f, K, K * J);
    return Eigen::Map<const HSOperator>(v.data(), k, j);
}

Vector BackwardSolution::phi_times(const ForwardEnsemble& forward, std::size_t p, std::size_t i, const Vector& dw) const {
    return phi(forward, p, i) * dw;
}

namespace {

struct Smoothing {
    bool active = false;
    Vector r;  // resolvent weights
};

void check_inputs(const BackwardConfig& config, const ForwardEnsemble& forward, const Problem& problem) {
    problem.validate();
    config.validate(problem.dim());
    if (!(config.grid == forward.grid) || !(config.grid == problem.grid()))
        throw ValidationError("backward: grids of config, forward ensemble and problem differ");
    if (forward.paths() == 0) throw ValidationError("backward: empty forward ensemble");
    if (forward.dim() != problem.dim()) throw ValidationError("backward: forward dimension mismatch");
    for (const auto& w : forward.wiener)
        if (w.modes() != problem.noise.modes()) throw ValidationError("backward: noise and Wiener paths disagree on J");
}

BackwardSolution run_picard(const BackwardConfig& config, const ForwardEnsemble& forward, const Problem& problem,
                            const Smoothing& sm) {
    check_inputs(config, forward, problem);
    const auto& op = problem.op;
    const std::size_t K = op.dim();
    const std::size_t J = problem.noise.modes();
    const std::size_t N = config.grid.N;
    const std::size_t P = forward.paths();
    const auto Ki = static_cast<Eigen::Index>(K);
    const auto Ji = static_cast<Eigen::Index>(J);
    const double dt = config.grid.dt();
    const Vector decay = op.semigroup_weights(dt);
    const Vector w2g = op.power_weights(2.0 * config.params.gamma);
    const Vector wa = op.power_weights(config.params.alpha);
    const Vector wd = op.power_weights(config.params.delta);
    const double m = problem.forward.m_level;
    const bool has_b = !problem.tensor.is_zero();
    const bool has_g = problem.noise.has_linear_part();
    const double inv_dt = 1.0 / dt;

    BackwardSolution sol;
    sol.grid = config.grid;
    sol.K = K;
    sol.J = J;
    sol.basis = config.basis;
    sol.tau_index = forward.tau_index;
    sol.z_star.assign(P, Matrix::Zero(Ki, static_cast<Eigen::Index>(N + 1)));
    sol.regression_coeffs.assign(N, LinearFit{});

    const std::size_t q = feature_count(config.basis, K);
    std::vector<Matrix> prev_z = sol.z_star;
    std::vector<LinearFit> prev_fit = sol.regression_coeffs;
    std::vector<std::size_t> alive;
    alive.reserve(P);

    // Noise drift G*(A^{-2alpha} Phi) is linear in the regression weights, so
    // per step it collapses to a (1 + kept) x K matrix applied to the design row.
    auto noise_drift_matrix = [&](const LinearFit& fit) -> Matrix {
        Matrix H = Matrix::Zero(fit.coef.rows(), Ki);
        if (fit.empty) return H;
        for (Eigen::Index j = 0; j < Ji; ++j) {
            Matrix Cj = fit.coef.middleCols(Ki * (1 + j), Ki);
            if (sm.active) Cj = Cj * sm.r.asDiagonal();
            H.noalias() += Cj * problem.noise.g_lin(static_cast<std::size_t>(j));
        }
        return H;
    };
    for (std::size_t k = 1; k <= config.picard_max; ++k) {
        std::vector<Matrix> z = std::vector<Matrix>(P, Matrix::Zero(Ki, static_cast<Eigen::Index>(N + 1)));
        std::vector<LinearFit> fits(N);
        for (std::size_t ii = N; ii-- > 0;) {
            const bool noise_term = has_g && ii + 1 < N && !prev_fit[ii + 1].empty;
            const Matrix H = noise_term ? noise_drift_matrix(prev_fit[ii + 1]) : Matrix();
            alive.clear();
            for (std::size_t p = 0; p < P; ++p)
                if (forward.tau_index[p] > ii) alive.push_back(p);
            if (alive.empty()) continue;
            const auto n = static_cast<Eigen::Index>(alive.size());
            Matrix X(n, static_cast<Eigen::Index>(q));
            Matrix T(n, Ki * (1 + Ji));
            const auto next = static_cast<Eigen::Index>(ii + 1);
            for (Eigen::Index r = 0; r < n; ++r) {
                const std::size_t p = alive[static_cast<std::size_t>(r)];
                const Matrix& y = forward.states[p];
                Vector target = z[p].col(next);
                if (ii + 1 < forward.tau_index[p]) {
                    Vector drift = w2g.cwiseProduct(y.col(next) - config.y_d.row(next).transpose());
                    if (sm.active) drift = sm.r.cwiseProduct(drift);
                    if (has_b) {
                        Vector yp = y.col(next);
                        truncate_in_place(yp, wa, m);
                        Vector h = prev_z[p].col(next);
                        if (sm.active) h = sm.r.cwiseProduct(h);
                        Vector lt = problem.tensor.linearization_transpose(yp, h);
                        if (sm.active) lt = sm.r.cwiseProduct(lt);
                        drift -= lt;
                    }
                    if (noise_term) {
                        const Vector d = prev_fit[ii + 1].design(state_features(config.basis, y.col(next)));
                        Vector gt = H.transpose() * d;
                        if (sm.active) gt = sm.r.cwiseProduct(gt);
                        drift += gt;
                    }
                    target += dt * drift;
                }
                target = decay.cwiseProduct(target);
                X.row(r) = state_features(config.basis, y.col(static_cast<Eigen::Index>(ii))).transpose();
                T.row(r).head(Ki) = target.transpose();
                const Vector dw = forward.wiener[p].standard(ii);
                for (Eigen::Index j = 0; j < Ji; ++j)
                    T.row(r).segment(Ki * (1 + j), Ki) = (target * (dw(j) * inv_dt)).transpose();
            }
            fits[ii] = fit_regression(X, T, config.ridge, ii);
            for (Eigen::Index r = 0; r < n; ++r) {
                const std::size_t p = alive[static_cast<std::size_t>(r)];
                z[p].col(static_cast<Eigen::Index>(ii)) = fits[ii].predict(X.row(r).transpose(), 0, K);
            }
        }

        // distance between successive iterates; the Phi part is a quadratic
        // form in the design row because both iterates share the design.
        std::vector<Matrix> gram(N);
        for (std::size_t i = 0; i < N; ++i) {
            if (fits[i].empty) continue;
            Matrix dc = fits[i].coef.rightCols(Ki * Ji);
            if (!prev_fit[i].empty) dc -= prev_fit[i].coef.rightCols(Ki * Ji);
            for (Eigen::Index j = 0; j < Ji; ++j) dc.middleCols(Ki * j, Ki) = dc.middleCols(Ki * j, Ki) * wd.asDiagonal();
            gram[i] = dc * dc.transpose();
        }
        double dz = 0.0, dphi = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            dz += (wd.asDiagonal() * (z[p] - prev_z[p])).colwise().squaredNorm().maxCoeff();
            for (std::size_t i = 0; i < std::min(N, forward.tau_index[p]); ++i) {
                if (fits[i].empty) continue;
                const Vector d = fits[i].design(state_features(config.basis, forward.states[p].col(static_cast<Eigen::Index>(i))));
                dphi += dt * d.dot(gram[i] * d);
            }
        }
        const double residual = (dz + dphi) / static_cast<double>(P);
        if (!std::isfinite(residual)) throw SolverError("backward: non-finite Picard residual at iteration " + std::to_string(k));
        sol.residual_history.push_back(residual);
        sol.picard_iterations_used = k;
        prev_z = std::move(z);
        prev_fit = std::move(fits);
        if (residual <= config.picard_tol) {
            sol.converged = true;
            break;
        }
    }
    sol.z_star = std::move(prev_z);
    sol.regression_coeffs = std::move(prev_fit);
    return sol;
}

}  // namespace

BackwardSolution solve_backward(const BackwardConfig& config, const ForwardEnsemble& forward, const Problem& problem) {
    return run_picard(config, forward, problem, Smoothing{});
}

BackwardSolution solve_backward_smoothed(const BackwardConfig& config, const ForwardEnsemble& forward,
                                         const Problem& problem, double lambda) {
    Smoothing sm;
    sm.active = true;
    sm.r = problem.op.resolvent_weights(lambda);
    return run_picard(config, forward, problem, sm);
}

Matrix solve_backward_deterministic(const BackwardConfig& config, const Problem& problem, const Matrix& states,
                                    std::size_t tau) {
    const auto& op = problem.op;
    const std::size_t K = op.dim();
    const std::size_t N = config.grid.N;
    config.validate(K);
    if (static_cast<std::size_t>(states.rows()) != K || static_cast<std::size_t>(states.cols()) != N + 1)
        throw ValidationError("deterministic backward: trajectory must be K x (N+1)");
    if (tau > N) throw ValidationError("deterministic backward: tau beyond the grid");
    const double dt = config.grid.dt();
    const Vector decay = op.semigroup_weights(dt);
    const Vector w2g = op.power_weights(2.0 * config.params.gamma);
    const Vector wa = op.power_weights(config.params.alpha);
    const double m = problem.forward.m_level;
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N + 1));
    for (std::size_t i = N; i-- > 0;) {
        if (i >= tau) continue;
        const auto next = static_cast<Eigen::Index>(i + 1);
        Vector target = z.col(next);
        if (i + 1 < tau) {
            Vector yp = states.col(next);
            Vector drift = w2g.cwiseProduct(yp - config.y_d.row(next).transpose());
            truncate_in_place(yp, wa, m);
            drift -= problem.tensor.linearization_transpose(yp, z.col(next));
            target += dt * drift;
        }
        z.col(static_cast<Eigen::Index>(i)) = decay.cwiseProduct(target);
    }
    return z;
}

double mean_sup_sq(const SpectralOperator& op, double delta, const std::vector<Matrix>& a,
                   const std::vector<Matrix>* b) {
    if (a.empty()) return 0.0;
    if (b && b->size() != a.size()) throw ValidationError("mean_sup_sq: path counts differ");
    const Vector wd = op.power_weights(delta);
    double total = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) {
        const Matrix d = b ? Matrix(a[p] - (*b)[p]) : a[p];
        total += (wd.asDiagonal() * d).colwise().squaredNorm().maxCoeff();
    }
    return total / static_cast<double>(a.size());
}

double phi_sq_distance(const SpectralOperator& op, double delta, const ForwardEnsemble& forward,
                       const BackwardSolution& a, const BackwardSolution* b) {
    const Vector wd = op.power_weights(delta);
    const double dt = a.grid.dt();
    double total = 0.0;
    for (std::size_t p = 0; p < a.paths(); ++p)
        for (std::size_t i = 0; i < a.grid.N; ++i) {
            HSOperator d = a.phi(forward, p, i);
            if (b) d -= b->phi(forward, p, i);
            total += dt * (wd.asDiagonal() * d).squaredNorm();
        }
    return total / static_cast<double>(std::max<std::size_t>(a.paths(), 1));
}

ResolventTable solve_backward_resolvent(const BackwardConfig& config, const ForwardEnsemble& forward,
                                        const Problem& problem, const std::vector<double>& lambdas) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw ValidationError("resolvent: lambda values must be positive");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw ValidationError("resolvent: lambda values must increase");
    }
    ResolventTable table;
    table.reference = solve_backward(config, forward, problem);
    const double delta = config.params.delta;
    const double z_ref = mean_sup_sq(problem.op, delta, table.reference.z_star);
    const double phi_ref = phi_sq_distance(problem.op, delta, forward, table.reference);
    for (double lam : lambdas) {
        const auto s = solve_backward_smoothed(config, forward, problem, lam);
        ResolventRow row;
        row.lambda = lam;
        row.z_deviation = mean_sup_sq(problem.op, delta, table.reference.z_star, &s.z_star);
        row.phi_deviation = phi_sq_distance(problem.op, delta, forward, table.reference, &s);
        row.z_relative = z_ref > 0.0 ? row.z_deviation / z_ref : row.z_deviation;
        row.phi_relative = phi_ref > 0.0 ? row.phi_deviation / phi_ref : row.phi_deviation;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace gsmp

#include "gsmp/harness/invariants.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>

#include "gsmp/convolution.hpp"
#include "gsmp/errors.hpp"

namespace gsmp::harness {

namespace {

struct Collector {
    std::string suite;
    std::vector<InvariantRow>& rows;

    /// value <= threshold passes
    void at_most(const std::string& name, const std::string& anchor, double value, double threshold) {
        rows.push_back({suite, name, anchor, value, threshold, std::isfinite(value) && value <= threshold});
    }
    void at_least(const std::string& name, const std::string& anchor, double value, double threshold) {
        rows.push_back({suite, name, anchor, value, threshold, std::isfinite(value) && value >= threshold});
    }
};

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> normal;
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// A forced run whose radius stops a sizeable share of paths, so support properties are exercised.
struct StoppedSetup {
    Problem problem;
    ControlPath forcing;
    ForwardEnsemble forward;
};

/// The forcing holds the mean state near twice the initial value; the radius is the 30% quantile
/// of the per-path peaks, kept above the initial norm.
StoppedSetup stopped_setup(const Problem& problem, const std::vector<WienerPath>& paths) {
    const Vector target = 2.0 * problem.op.eigen_vector().cwiseProduct(problem.forward.xi);
    const Vector f = problem.forward.control_map.colPivHouseholderQr().solve(target);
    Matrix values = f.transpose().replicate(static_cast<Eigen::Index>(problem.grid().N), 1);
    auto forcing = ControlPath::deterministic(std::move(values));
    const auto free_run = run_forward(problem, paths, forcing);
    const Vector wa = problem.op.power_weights(problem.params().alpha);
    std::vector<double> peaks;
    for (const auto& s : free_run.states) peaks.push_back((wa.asDiagonal() * s).colwise().norm().maxCoeff());
    const auto q = peaks.begin() + static_cast<long>(3 * peaks.size() / 10);
    std::nth_element(peaks.begin(), q, peaks.end());
    Problem stopped = problem;
    stopped.forward.m_level = std::max(*q, (1.0 + 1e-6) * problem.op.norm(problem.params().alpha, problem.forward.xi));
    auto fwd = run_forward(stopped, paths, forcing);
    return {std::move(stopped), std::move(forcing), std::move(fwd)};
}

void operator_suite(const ExperimentConfig& config, const Problem& problem, std::vector<InvariantRow>& rows) {
    Collector c{"operator", rows};
    const auto& op = problem.op;
    const auto K = static_cast<Eigen::Index>(op.dim());
    const auto& par = problem.params();
    std::mt19937_64 rng(config.seed ^ 0xA11CEULL);
    std::uniform_real_distribution<double> u11(-1.0, 1.0), u01(0.0, 1.0);

    double power = 0.0, semi = 0.0, comm = 0.0, res_contr = 0.0, res_comm = 0.0, mono = 0.0, lip = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const Vector y = random_vector(rng, K);
        const double a = u11(rng), b = u11(rng), t1 = u01(rng), t2 = u01(rng);
        const SpectralField f(y);
        power = std::max(power, rel(apply_fractional_power(op, a, apply_fractional_power(op, b, f)).coeffs,
                                    apply_fractional_power(op, a + b, f).coeffs));
        semi = std::max(semi, rel(apply_semigroup(op, t1, apply_semigroup(op, t2, f)).coeffs,
                                  apply_semigroup(op, t1 + t2, f).coeffs));
        comm = std::max(comm, rel(apply_fractional_power(op, a, apply_semigroup(op, t1, f)).coeffs,
                                  apply_semigroup(op, t1, apply_fractional_power(op, a, f)).coeffs));
        const double lam = std::pow(10.0, 2.0 * u11(rng));
        res_contr = std::max(res_contr, apply_resolvent(op, lam, f).coeffs.norm() - y.norm());
        res_comm = std::max(res_comm, rel(apply_fractional_power(op, a, apply_resolvent(op, lam, f)).coeffs,
                                          apply_resolvent(op, lam, apply_fractional_power(op, a, f)).coeffs));
        const double hi = u01(rng), lo = hi * u01(rng);
        const double C = std::max(1.0, std::pow(op.lambda_min(), lo - hi));
        mono = std::max(mono, op.norm(lo, y) - C * op.norm(hi, y));
        const Vector z = random_vector(rng, K);
        const double m = 0.5 * (op.norm(par.alpha, y) + op.norm(par.alpha, z)) * u01(rng) + 1e-3;
        const double num = op.norm(par.alpha, truncate_pi_m(op, SpectralField(y), m, par).coeffs -
                                                  truncate_pi_m(op, SpectralField(z), m, par).coeffs);
        lip = std::max(lip, num / op.norm(par.alpha, y - z));
    }
    c.at_most("power_law", "A^(a+b) y = A^a A^b y", power, 1e-12);
    c.at_most("semigroup_law", "e^(-As) e^(-At) y = e^(-A(s+t)) y", semi, 1e-12);
    c.at_most("power_semigroup_commute", "A^a e^(-At) y = e^(-At) A^a y", comm, 1e-12);
    c.at_most("resolvent_contraction", "|R(lambda) y| <= |y|", res_contr, 1e-12);
    c.at_most("resolvent_power_commute", "A^a R(lambda) y = R(lambda) A^a y", res_comm, 1e-12);
    c.at_most("norm_monotonicity", "|A^b y| <= C |A^a y| for b <= a", mono, 1e-12);
    c.at_most("truncation_lipschitz", "|pi_m(y) - pi_m(z)|_alpha <= 2 |y - z|_alpha", lip, 2.0);

    double smooth = 0.0;
    for (double a : {0.1, 0.25, 0.5, 0.75, 1.0})
        for (int s = 1; s <= 20; ++s) {
            const double t = config.T * s / 20.0;
            const double bound = std::pow(a / std::exp(1.0), a) * std::pow(t, -a);
            const double lhs = (op.eigen_vector().array().pow(a) * (-op.eigen_vector().array() * t).exp()).maxCoeff();
            smooth = std::max(smooth, lhs / bound);
        }
    c.at_most("smoothing_bound", "|A^a e^(-At)| <= (a/e)^a t^(-a)", smooth, 1.0 + 1e-12);

    const Vector y0 = random_vector(rng, K);
    const double conv = rel(apply_resolvent(op, 1e6, SpectralField(y0)).coeffs, y0);
    c.at_most("resolvent_limit", "R(lambda) y -> y as lambda -> infinity (lambda = 1e6)", conv,
              op.lambda_max() / (op.lambda_max() + 1e6) * (1.0 + 1e-9));

    double adj = 0.0;
    const Vector wd = op.power_weights(-par.delta);
    for (int s = 0; s < 50; ++s) {
        const Vector y = random_vector(rng, K), z = random_vector(rng, K), h = random_vector(rng, K);
        const double lhs = wd.cwiseProduct(problem.tensor.apply(z, y) + problem.tensor.apply(y, z)).dot(h);
        const Vector bs = apply_bilinear_adjoint(problem.tensor, op, par, SpectralField(y), SpectralField(h)).coeffs;
        const double rhs = op.inner(par.alpha, z, bs);
        adj = std::max(adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    c.at_most("bilinear_adjoint_identity", "<A^-delta [B(z,y) + B(y,z)], h> = <A^alpha z, A^alpha B*_delta(y,h)>", adj, 1e-12);

    if (problem.tensor.m_tilde() > 0.0) {
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            const Vector y = random_vector(rng, K), z = random_vector(rng, K);
            const Vector d = wd.cwiseProduct(problem.tensor.apply(y, y) - problem.tensor.apply(z, z));
            const double bound = problem.tensor.m_tilde() * (op.norm(par.alpha, y) + op.norm(par.alpha, z)) *
                                 op.norm(par.alpha, y - z);
            worst = std::max(worst, d.norm() / bound);
        }
        c.at_most("bilinear_difference_bound",
                  "|A^-delta (B(y) - B(z))| <= M (|y|_alpha + |z|_alpha) |y - z|_alpha", worst, 1.0 + 1e-12);
    }
    if (problem.tensor.kind() == TensorKind::fourier2d || config.op.tensor_skew) {
        double energy = 0.0;
        for (int s = 0; s < 100; ++s) {
            const Vector y = random_vector(rng, K), z = random_vector(rng, K);
            energy = std::max(energy, std::abs(problem.tensor.apply(y, z).dot(z)) / (y.norm() * z.squaredNorm()));
        }
        c.at_most("convection_energy", "<B(y,z), z> = 0", energy, 1e-12);
    }
}

void stochastics_suite(const ExperimentConfig& config, const Problem& problem, std::vector<InvariantRow>& rows) {
    Collector c{"stochastics", rows};
    const auto& op = problem.op;
    const auto K = static_cast<Eigen::Index>(op.dim());
    const auto J = static_cast<Eigen::Index>(problem.noise.modes());
    std::mt19937_64 rng(config.seed ^ 0xB0B0ULL);

    double gadj = 0.0;
    const Vector w2a = op.power_weights(2.0 * problem.noise.alpha());
    for (int s = 0; s < 50; ++s) {
        const Vector h = random_vector(rng, K);
        const Matrix phi = random_matrix(rng, K, J);
        const double lhs = (w2a.asDiagonal() * problem.noise.apply_linear(h)).cwiseProduct(phi).sum();
        const double rhs = h.dot(apply_noise_adjoint(problem.noise, op, phi).coeffs);
        gadj = std::max(gadj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    c.at_most("noise_adjoint_identity", "<A^alpha G(h), A^alpha Phi>_HS = <h, G*(Phi)>", gadj, 1e-12);

    const TimeGrid grid = problem.grid();
    double defect = 0.0;
    std::uniform_int_distribution<std::size_t> tau_dist(0, grid.N);
    for (std::size_t p = 0; p < 100; ++p) {
        const auto path = sample_wiener(problem.noise, grid, config.seed + 17, p);
        const auto integrand = AdaptedIntegrand::build(path, [&](std::size_t, const Eigen::Ref<const Matrix>& past) {
            HSOperator phi = HSOperator::Ones(K, J);
            if (past.rows() > 0) phi *= 1.0 + past.colwise().sum().sum();
            return phi;
        });
        const std::size_t tau = tau_dist(rng);
        const auto full = stochastic_convolution(op, grid, integrand, path);
        const auto stopped = stopped_convolution(op, grid, integrand, path, tau);
        for (std::size_t i = 0; i <= grid.N; ++i) {
            const std::size_t ti = std::min(i, tau);
            const Vector lhs = apply_semigroup(op, grid.t(i) - grid.t(ti), full[ti]).coeffs;
            defect = std::max(defect, rel(lhs, stopped[i].coeffs));
        }
    }
    c.at_most("stopped_convolution", "S(t - t^tau) I(t^tau) = I_tau(t)", defect, 1e-12);

    // Karhunen-Loeve statistics across the ensemble of increments
    const std::size_t P = std::min<std::size_t>(config.paths, 4000);
    const auto paths = sample_paths(problem, P, config.seed);
    double worst_var = 0.0, worst_cov = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) {
        const double mu = problem.noise.mu()[static_cast<std::size_t>(j)];
        if (mu == 0.0) continue;
        double s2 = 0.0, s4 = 0.0;
        std::size_t n = 0;
        for (const auto& w : paths)
            for (std::size_t i = 0; i < w.steps(); ++i) {
                const double x = w.increments()(static_cast<Eigen::Index>(i), j);
                s2 += x * x;
                s4 += x * x * x * x;
                ++n;
            }
        const double var = s2 / static_cast<double>(n);
        const double se = std::sqrt((s4 / static_cast<double>(n) - var * var) / static_cast<double>(n));
        worst_var = std::max(worst_var, std::abs(var - mu * grid.dt()) / se);
        for (Eigen::Index l = j + 1; l < J; ++l) {
            if (problem.noise.mu()[static_cast<std::size_t>(l)] == 0.0) continue;
            double sxy = 0.0, sxy2 = 0.0;
            for (const auto& w : paths) {
                const Matrix inc = w.increments();
                for (Eigen::Index i = 0; i < inc.rows(); ++i) {
                    const double v = inc(i, j) * inc(i, l);
                    sxy += v;
                    sxy2 += v * v;
                }
            }
            const double m = sxy / static_cast<double>(n);
            const double se2 = std::sqrt((sxy2 / static_cast<double>(n) - m * m) / static_cast<double>(n));
            worst_cov = std::max(worst_cov, std::abs(m) / se2);
        }
    }
    c.at_most("increment_variance", "Var(increment_j) = mu_j dt (in standard errors)", worst_var, 4.0);
    c.at_most("mode_independence", "Cov(increment_j, increment_l) = 0 for j != l (in standard errors)", worst_cov, 4.0);

    // Maximal inequality: E sup |I|^2 / E int |Phi|^2 stays bounded under refinement.
    auto ratio = [&](std::size_t N) {
        const TimeGrid g(grid.T, N);
        double sup = 0.0, energy = 0.0;
        const HSOperator phi = HSOperator::Identity(K, J);
        const auto integ = AdaptedIntegrand::constant(phi, N);
        for (std::size_t p = 0; p < 500; ++p) {
            const auto path = sample_wiener(problem.noise, g, config.seed + 99, p);
            const auto I = stochastic_convolution(op, g, integ, path);
            double s = 0.0;
            for (const auto& f : I) s = std::max(s, f.coeffs.squaredNorm());
            sup += s;
            for (std::size_t i = 0; i < N; ++i) energy += g.dt() * phi.squaredNorm();
        }
        return sup / energy;
    };
    const double r1 = ratio(grid.N), r2 = ratio(2 * grid.N);
    c.at_most("maximal_inequality_stability", "E sup |I|^2 <= c E int |Phi|^2 dt with c stable under refinement",
              std::max(r1 / r2, r2 / r1), 2.0);
}

void forward_suite(const ExperimentConfig& config, const Problem& problem, std::vector<InvariantRow>& rows) {
    Collector c{"forward", rows};
    const std::size_t P = std::min<std::size_t>(config.paths, 500);
    const auto paths = sample_paths(problem, P, config.seed);
    const auto u = config.initial_control();
    const auto fwd = run_forward(problem, paths, u);
    const Vector wa = problem.op.power_weights(problem.params().alpha);

    const auto setup = stopped_setup(problem, paths);
    const auto& tight = setup.problem;
    const auto& fwd_t = setup.forward;
    c.at_least("stopping_exercised", "fraction of forced paths stopped at the test radius", fwd_t.tau_hit_fraction(), 0.1);
    double excess = 0.0;
    for (std::size_t p = 0; p < fwd_t.paths(); ++p)
        for (std::size_t i = 0; i < fwd_t.tau_index[p]; ++i)
            excess = std::max(excess, wa.cwiseProduct(fwd_t.states[p].col(static_cast<Eigen::Index>(i))).norm() - tight.forward.m_level);
    c.at_most("pre_stop_bound", "|y_i|_alpha <= m for every step before tau", excess, 0.0);
    double first_exceed = 0.0;
    for (std::size_t p = 0; p < fwd_t.paths(); ++p)
        if (fwd_t.tau_index[p] < tight.grid().N) {
            const double n = wa.cwiseProduct(fwd_t.states[p].col(static_cast<Eigen::Index>(fwd_t.tau_index[p]))).norm();
            if (!(n > tight.forward.m_level)) first_exceed = 1.0;
        }
    c.at_most("stop_is_first_exceedance", "|y_tau|_alpha > m at the stopping index", first_exceed, 0.0);

    const auto v1 = config.direction();
    ExperimentConfig other = config;
    other.control.direction = "random";
    const auto v2 = other.direction();
    const auto z1 = run_linearized(problem, fwd, v1);
    const auto z2 = run_linearized(problem, fwd, v2);
    const auto z12 = run_linearized(problem, fwd, ControlPath::combine(0.7, v1, -1.3, v2));
    double lin = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        const Matrix comb = 0.7 * z1[p] - 1.3 * z2[p];
        lin = std::max(lin, (z12[p] - comb).norm() / std::max(1.0, comb.norm()));
    }
    c.at_most("linearized_linearity", "z(u, a v1 + b v2) = a z(u, v1) + b z(u, v2)", lin, 1e-12);

    // continuity in the control and stability of the stopping index
    std::vector<double> cs, mismatch;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const auto u2 = ControlPath::combine(1.0, setup.forcing, eps, v1);
        const auto f2 = run_forward(tight, paths, u2);
        double num = 0.0;
        double diff = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            num += (wa.asDiagonal() * (f2.states[p] - fwd_t.states[p])).colwise().squaredNorm().maxCoeff();
            if (f2.tau_index[p] != fwd_t.tau_index[p]) diff += 1.0;
        }
        const double du = ControlPath::combine(1.0, u2, -1.0, setup.forcing).norm(problem.op, problem.params().beta, problem.grid().dt(), P);
        cs.push_back(num / static_cast<double>(P) / (du * du));
        mismatch.push_back(diff / static_cast<double>(P));
    }
    const auto [cmin, cmax] = std::minmax_element(cs.begin(), cs.end());
    c.at_most("control_continuity", "E sup |y(u1) - y(u2)|^2_alpha <= c |u1 - u2|^2 with c stable", *cmax / *cmin, 4.0);
    double mono = 0.0;
    for (std::size_t k = 1; k < mismatch.size(); ++k) mono = std::max(mono, mismatch[k] - mismatch[k - 1]);
    c.at_most("stopping_stability", "P(tau(u1) != tau(u2)) -> 0 as u1 -> u2 (non-increasing over the ladder)", mono, 0.0);

    auto increment = [&](std::size_t N) {
        Problem pr = problem;
        pr.forward.grid = TimeGrid(problem.grid().T, N);
        const auto ps = sample_paths(pr, 200, config.seed + 5);
        const auto f = run_forward(pr, ps, ControlPath::zero(N, pr.dim()));
        double worst = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (const auto& st : f.states)
                s += (st.col(static_cast<Eigen::Index>(i + 1)) - st.col(static_cast<Eigen::Index>(i))).squaredNorm();
            worst = std::max(worst, s / static_cast<double>(f.paths()));
        }
        return worst;
    };
    c.at_most("mean_square_continuity", "max_i E|y_(i+1) - y_i|^2 decreases as dt decreases",
              increment(2 * problem.grid().N) / increment(problem.grid().N), 1.0);
}

void adjoint_suite(const ExperimentConfig& config, const Problem& problem, std::vector<InvariantRow>& rows) {
    Collector c{"adjoint", rows};
    const std::size_t P = std::min<std::size_t>(config.paths, 2000);
    const auto paths = sample_paths(problem, P, config.seed);
    const auto u = config.initial_control();
    const auto bc = config.build_backward(problem, paths);
    const auto setup = stopped_setup(problem, paths);
    const auto& tight = setup.problem;
    const auto& fwd = setup.forward;
    const auto bwd = solve_backward(bc, fwd, tight);

    double terminal = 0.0, support = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        terminal = std::max(terminal, bwd.z_star[p].col(static_cast<Eigen::Index>(problem.grid().N)).cwiseAbs().maxCoeff());
        for (std::size_t i = fwd.tau_index[p]; i <= problem.grid().N; ++i) {
            support = std::max(support, bwd.z_star[p].col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff());
            if (i < problem.grid().N) support = std::max(support, bwd.phi(fwd, p, i).cwiseAbs().maxCoeff());
        }
    }
    c.at_most("terminal_condition", "z*(T) = 0", terminal, 0.0);
    c.at_most("post_stop_support", "z* = 0 and Phi = 0 on [tau, T]", support, 0.0);
    double worst_ratio = 0.0;
    for (std::size_t k = 1; k < bwd.residual_history.size(); ++k)
        worst_ratio = std::max(worst_ratio, bwd.residual_history[k] / bwd.residual_history[k - 1]);
    c.at_most("picard_contraction", "Picard residuals strictly decrease", worst_ratio, 1.0 - 1e-12);
    c.at_least("picard_converged", "Picard iteration reaches its tolerance", bwd.converged ? 1.0 : 0.0, 1.0);

    // zero-noise single path: regression solve equals the direct backward sweep
    Problem quiet = problem;
    quiet.noise = NoiseModel::none(problem.dim(), problem.params().alpha);
    const auto qpaths = sample_paths(quiet, 1, config.seed);
    const auto qf = run_forward(quiet, qpaths, u);
    const auto qb = solve_backward(bc, qf, quiet);
    const Matrix qd = solve_backward_deterministic(bc, quiet, qf.states[0], qf.tau_index[0]);
    c.at_most("zero_noise_equivalence", "regression solve with G = 0 equals the deterministic backward solve",
              (qb.z_star[0] - qd).cwiseAbs().maxCoeff(), 1e-10);

    // out-of-sample martingale property of the compensated adjoint
    const auto fresh = sample_paths(tight, std::min<std::size_t>(P, 1000), config.seed + 1000003);
    const auto ff = run_forward(tight, fresh, setup.forcing);
    const auto& op = tight.op;
    const std::size_t N = tight.grid().N;
    const double dt = tight.grid().dt();
    const Vector decay = op.semigroup_weights(dt);
    const Vector w2g = op.power_weights(2.0 * problem.params().gamma);
    const Vector wa = op.power_weights(problem.params().alpha);
    std::size_t tests = 0, rejections = 0;
    for (std::size_t i = 0; i + 1 < N; ++i) {
        const auto& fit = bwd.regression_coeffs[i];
        if (fit.empty) continue;
        std::vector<Vector> resid;
        for (std::size_t p = 0; p < ff.paths(); ++p) {
            if (ff.tau_index[p] <= i) continue;
            const auto pred = [&](std::size_t step) -> Vector {
                if (step >= N || ff.tau_index[p] <= step || bwd.regression_coeffs[step].empty) return Vector::Zero(op.dim());
                return bwd.regression_coeffs[step].predict(
                    state_features(bwd.basis, ff.states[p].col(static_cast<Eigen::Index>(step))), 0, op.dim());
            };
            const Vector next = pred(i + 1);
            Vector target = next;
            if (i + 1 < ff.tau_index[p]) {
                const Vector y = ff.states[p].col(static_cast<Eigen::Index>(i + 1));
                Vector yp = y;
                truncate_in_place(yp, wa, tight.forward.m_level);
                Vector drift = w2g.cwiseProduct(y - bc.y_d.row(static_cast<Eigen::Index>(i + 1)).transpose());
                drift -= tight.tensor.linearization_transpose(yp, next);
                if (tight.noise.has_linear_part()) drift += tight.noise.transpose_contract(bwd.phi(ff, p, i + 1));
                target += dt * drift;
            }
            resid.push_back(decay.cwiseProduct(target) - pred(i));
        }
        if (resid.size() < 30) continue;
        const double n = static_cast<double>(resid.size());
        // the fitted intercept carries its own sampling error from the training ensemble
        double n_fit = 0.0;
        for (std::size_t p = 0; p < fwd.paths(); ++p) n_fit += fwd.tau_index[p] > i ? 1.0 : 0.0;
        // modes share one driver, so each step is one test with a Bonferroni split over modes
        const auto Kd = static_cast<Eigen::Index>(op.dim());
        boost::math::normal_distribution<double> gauss;
        const double crit = boost::math::quantile(boost::math::complement(gauss, 0.005 / static_cast<double>(Kd)));
        bool reject = false, tested = false;
        for (Eigen::Index k = 0; k < Kd; ++k) {
            double s = 0.0, ss = 0.0;
            for (const auto& r : resid) s += r(k);
            const double m = s / n;
            for (const auto& r : resid) ss += (r(k) - m) * (r(k) - m);
            const double se = std::sqrt(ss / (n - 1.0) * (1.0 / n + 1.0 / n_fit));
            if (se <= 1e-300) continue;
            tested = true;
            reject = reject || std::abs(m / se) > crit;
        }
        if (tested) ++tests;
        if (reject) ++rejections;
    }
    double bound = 0.0;
    if (tests > 0) {
        boost::math::binomial_distribution<double> binom(static_cast<double>(tests), 0.01);
        bound = boost::math::quantile(binom, 0.999);
    }
    c.at_most("martingale_residual", "compensated adjoint increments have zero mean (steps rejected at 1%, Bonferroni over modes)",
              static_cast<double>(rejections), bound);
}

void control_suite(const ExperimentConfig& config, const Problem& problem, std::vector<InvariantRow>& rows) {
    Collector c{"control", rows};
    const auto& op = problem.op;
    const TimeGrid grid = problem.grid();
    const double beta = problem.params().beta;
    const double dt = grid.dt();
    const auto K = static_cast<Eigen::Index>(op.dim());
    const auto N = static_cast<Eigen::Index>(grid.N);
    std::mt19937_64 rng(config.seed ^ 0xC0FFEEULL);

    std::vector<AdmissibleSet> sets{AdmissibleSet::norm_ball(1.0, beta), AdmissibleSet::pointwise_ball(0.5, beta),
                                    AdmissibleSet::box(Vector::Constant(K, -0.3), Vector::Constant(K, 0.2), beta)};
    double idem = 0.0, nonexp = 0.0, vi = -1e300;
    for (const auto& set : sets) {
        for (int s = 0; s < 20; ++s) {
            const auto v1 = ControlPath::deterministic(2.0 * random_matrix(rng, N, K));
            const auto v2 = ControlPath::deterministic(2.0 * random_matrix(rng, N, K));
            const auto p1 = project_admissible(set, op, grid, v1, 1);
            const auto p2 = project_admissible(set, op, grid, v2, 1);
            const auto pp = project_admissible(set, op, grid, p1, 1);
            idem = std::max(idem, ControlPath::combine(1.0, pp, -1.0, p1).norm(op, beta, dt, 1));
            const double d12 = ControlPath::combine(1.0, v1, -1.0, v2).norm(op, beta, dt, 1);
            nonexp = std::max(nonexp, ControlPath::combine(1.0, p1, -1.0, p2).norm(op, beta, dt, 1) - d12);
            if (s < 5) {
                const auto r = ControlPath::combine(1.0, v1, -1.0, p1);
                for (int t = 0; t < 20; ++t) {
                    const auto ut = sample_admissible(set, op, grid, rng());
                    vi = std::max(vi, ControlPath::inner(op, beta, dt, r, ControlPath::combine(1.0, ut, -1.0, p1), 1));
                }
            }
        }
    }
    c.at_most("projection_idempotent", "P(P(v)) = P(v)", idem, 1e-12);
    c.at_most("projection_nonexpansive", "|P(v1) - P(v2)| <= |v1 - v2|", nonexp, 1e-12);
    c.at_most("projection_variational", "<v - P(v), w - P(v)> <= 0 for w in U", vi, 1e-12);

    const std::size_t P = std::min<std::size_t>(config.paths, 2000);
    const auto paths = sample_paths(problem, P, config.seed);
    const auto u = config.initial_control();
    const auto v = config.direction();
    const auto bc = config.build_backward(problem, paths);
    const auto fwd = run_forward(problem, paths, u);
    const auto z = run_linearized(problem, fwd, v);
    const auto bwd = solve_backward(bc, fwd, problem);
    const auto d = duality_residual(problem, fwd, z, bwd, v, bc.y_d);
    c.at_most("duality", "E int <A^gamma (y - y_d), A^gamma z> = E int <z*, F v> (residual in standard errors)",
              d.std_error > 0.0 ? d.residual / d.std_error : d.residual * 1e8, 3.0);

    const auto dj = gateaux_cost_derivative(problem, fwd, z, u, v, bc.y_d);
    const auto grad = cost_gradient(problem, bwd, u);
    const auto gi = ControlPath::inner_per_path(op, beta, dt, grad, v, P);
    double gmean = 0.0;
    for (double x : gi) gmean += x;
    gmean /= static_cast<double>(P);
    c.at_most("gradient_representation", "dJ(u)[v] = E int <F* A^(-2 beta) z* + u, v>_beta (in standard errors)",
              std::abs(dj.value - gmean) / std::max(d.std_error, 1e-300), 3.0);

    double worst = 1e300;
    for (int s = 0; s < 20; ++s) {
        auto vv = ControlPath::deterministic(random_matrix(rng, N, K));
        const double n = vv.norm(op, beta, dt, P);
        vv = ControlPath::combine(1.0 / n, vv, 0.0, vv);
        const auto zz = run_linearized(problem, fwd, vv);
        worst = std::min(worst, second_derivative(problem, fwd, zz, zz, vv, vv));
    }
    c.at_least("coercivity", "d2J[v,v] >= E int |v|^2_beta", worst, 1.0 - 1e-10);

    // post-stop vanishing of the control map T(u) on a radius where paths stop
    const auto setup = stopped_setup(problem, paths);
    const auto& tight = setup.problem;
    const auto& ft = setup.forward;
    const auto bt = solve_backward(bc, ft, tight);
    const auto tu = project_admissible(config.build_admissible(), op, grid, adjoint_descent_direction(tight, bt), P);
    double post = 0.0;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = ft.tau_index[p]; i < grid.N; ++i)
            post = std::max(post, tu.for_path(p).row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff());
    c.at_most("control_post_stop", "u = -P_U(F* A^(-2 beta) z*) vanishes on [tau, T]", post, 0.0);

    // Frechet check on the deterministic skeleton: the remainder is o(theta) uniformly over unit directions
    Problem quiet = problem;
    quiet.noise = NoiseModel::none(problem.dim(), problem.params().alpha);
    const auto qp = sample_paths(quiet, 1, config.seed);
    const auto qf = run_forward(quiet, qp, u);
    const auto qc = evaluate_cost(quiet, qf, u, bc.y_d);
    double coarse = 0.0, fine = 0.0;
    for (int s = 0; s < 10; ++s) {
        auto vv = ControlPath::deterministic(random_matrix(rng, N, K));
        const double n = vv.norm(op, beta, dt, 1);
        vv = ControlPath::combine(1.0 / n, vv, 0.0, vv);
        const auto zz = run_linearized(quiet, qf, vv);
        const double der = gateaux_cost_derivative(quiet, qf, zz, u, vv, bc.y_d).value;
        auto remainder = [&](double theta) {
            const auto sh = ControlPath::combine(1.0, u, theta, vv);
            const double js = evaluate_cost(quiet, run_forward(quiet, qp, sh), sh, bc.y_d).J;
            return std::abs(js - qc.J - theta * der) / theta;
        };
        coarse = std::max(coarse, remainder(1e-2));
        fine = std::max(fine, remainder(1e-3));
    }
    c.at_most("frechet_uniform", "sup over unit v of |J(u + theta v) - J(u) - theta dJ[v]| / theta is o(1) (ratio 1e-3 to 1e-2)",
              fine / coarse, 0.2);
}

}  // namespace

const std::vector<std::string>& invariant_suites() {
    static const std::vector<std::string> s{"operator", "stochastics", "forward", "adjoint", "control"};
    return s;
}

std::vector<InvariantRow> run_invariants(const ExperimentConfig& config, const std::string& suite) {
    const auto& names = invariant_suites();
    if (!suite.empty() && std::find(names.begin(), names.end(), suite) == names.end())
        throw ValidationError("unknown invariant suite '" + suite + "'");
    const Problem problem = config.build_problem();
    std::vector<InvariantRow> rows;
    for (const auto& name : names) {
        if (!suite.empty() && name != suite) continue;
        if (name == "operator") operator_suite(config, problem, rows);
        if (name == "stochastics") stochastics_suite(config, problem, rows);
        if (name == "forward") forward_suite(config, problem, rows);
        if (name == "adjoint") adjoint_suite(config, problem, rows);
        if (name == "control") control_suite(config, problem, rows);
    }
    return rows;
}

}  // namespace gsmp::harness

#include "gsmp/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gsmp/errors.hpp"

namespace gsmp {

// ---------------------------------------------------------------- admissible set

AdmissibleSet AdmissibleSet::norm_ball(double R, double beta) {
    AdmissibleSet s;
    s.variant_ = Variant::norm_ball;
    s.radius_ = R;
    s.beta_ = beta;
    if (!(R > 0.0)) throw ValidationError("admissible.radius must be positive");
    return s;
}

AdmissibleSet AdmissibleSet::pointwise_ball(double r, double beta) {
    AdmissibleSet s = norm_ball(r, beta);
    s.variant_ = Variant::pointwise_ball;
    return s;
}

AdmissibleSet AdmissibleSet::box(Vector lo, Vector hi, double beta) {
    AdmissibleSet s;
    s.variant_ = Variant::box;
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    s.beta_ = beta;
    if (s.lo_.size() != s.hi_.size()) throw ValidationError("admissible box: lo and hi differ in length");
    if ((s.lo_.array() > 0.0).any() || (s.hi_.array() < 0.0).any())
        throw ValidationError("admissible box must contain 0 (lo <= 0 <= hi)");
    return s;
}

void AdmissibleSet::validate(std::size_t K) const {
    if (variant_ == Variant::box && static_cast<std::size_t>(lo_.size()) != K)
        throw ValidationError("admissible box bounds must have K entries");
}

std::string to_string(AdmissibleSet::Variant v) {
    switch (v) {
        case AdmissibleSet::Variant::norm_ball: return "norm_ball";
        case AdmissibleSet::Variant::pointwise_ball: return "pointwise_ball";
        case AdmissibleSet::Variant::box: return "box";
    }
    return "unknown";
}

ControlPath project_admissible(const AdmissibleSet& set, const SpectralOperator& op, const TimeGrid& grid,
                               const ControlPath& v, std::size_t paths) {
    set.validate(op.dim());
    v.check(grid.N, op.dim(), v.is_per_path() ? v.path_count() : paths);
    const std::size_t P = v.is_per_path() ? v.path_count() : 1;
    const Vector wb = op.power_weights(set.beta());
    std::vector<Matrix> out(P);
    switch (set.variant()) {
        case AdmissibleSet::Variant::norm_ball: {
            const double n = v.norm(op, set.beta(), grid.dt(), P);
            const double s = n > set.radius() ? set.radius() / n : 1.0;
            for (std::size_t p = 0; p < P; ++p) out[p] = s * v.for_path(p);
            break;
        }
        case AdmissibleSet::Variant::pointwise_ball: {
            for (std::size_t p = 0; p < P; ++p) {
                out[p] = v.for_path(p);
                for (Eigen::Index i = 0; i < out[p].rows(); ++i) {
                    const double n = (out[p].row(i).transpose().cwiseProduct(wb)).norm();
                    if (n > set.radius()) out[p].row(i) *= set.radius() / n;
                }
            }
            break;
        }
        case AdmissibleSet::Variant::box: {
            for (std::size_t p = 0; p < P; ++p) {
                out[p] = v.for_path(p);
                for (Eigen::Index i = 0; i < out[p].rows(); ++i)
                    out[p].row(i) = out[p].row(i).cwiseMax(set.lo().transpose()).cwiseMin(set.hi().transpose());
            }
            break;
        }
    }
    if (!v.is_per_path()) return ControlPath::deterministic(std::move(out[0]));
    return ControlPath::per_path(std::move(out), v.adapted_tag());
}

ControlPath sample_admissible(const AdmissibleSet& set, const SpectralOperator& op, const TimeGrid& grid,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto N = static_cast<Eigen::Index>(grid.N);
    const auto K = static_cast<Eigen::Index>(op.dim());
    Matrix u(N, K);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index k = 0; k < K; ++k) u(i, k) = normal(rng);
    const Vector wb = op.power_weights(set.beta());
    switch (set.variant()) {
        case AdmissibleSet::Variant::norm_ball: {
            const double n = std::sqrt(grid.dt() * (u * wb.asDiagonal()).squaredNorm());
            u *= set.radius() * unif(rng) / n;
            break;
        }
        case AdmissibleSet::Variant::pointwise_ball:
            for (Eigen::Index i = 0; i < N; ++i) {
                const double n = u.row(i).transpose().cwiseProduct(wb).norm();
                u.row(i) *= set.radius() * unif(rng) / n;
            }
            break;
        case AdmissibleSet::Variant::box:
            for (Eigen::Index i = 0; i < N; ++i)
                for (Eigen::Index k = 0; k < K; ++k) u(i, k) = set.lo()(k) + unif(rng) * (set.hi()(k) - set.lo()(k));
            break;
    }
    return ControlPath::deterministic(std::move(u));
}

// ---------------------------------------------------------------- cost and derivatives

namespace {

Estimate mean_and_se(const std::vector<double>& x) {
    Estimate e;
    if (x.empty()) return e;
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += v;
    e.value = s / n;
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - e.value) * (v - e.value);
        e.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

void check_ensemble(const Problem& problem, const ForwardEnsemble& forward, const Matrix& y_d) {
    if (!(forward.grid == problem.grid())) throw ValidationError("control: ensemble grid differs from problem grid");
    if (forward.dim() != problem.dim()) throw ValidationError("control: ensemble dimension mismatch");
    if (static_cast<std::size_t>(y_d.rows()) != problem.grid().N || static_cast<std::size_t>(y_d.cols()) != problem.dim())
        throw ValidationError("control: y_d must be N x K");
}

void check_linearized(const ForwardEnsemble& forward, const std::vector<Matrix>& z) {
    if (z.size() != forward.paths()) throw ValidationError("control: linearized run has the wrong number of paths");
    for (const auto& m : z)
        if (m.rows() != forward.states[0].rows() || m.cols() != forward.states[0].cols())
            throw ValidationError("control: linearized trajectory shape mismatch");
}

}  // namespace

CostReport evaluate_cost(const Problem& problem, const ForwardEnsemble& forward, const ControlPath& u,
                         const Matrix& y_d) {
    check_ensemble(problem, forward, y_d);
    const std::size_t P = forward.paths();
    u.check(problem.grid().N, problem.dim(), P);
    const double dt = problem.grid().dt();
    const Vector wg = problem.op.power_weights(problem.params().gamma);
    const auto energy = ControlPath::inner_per_path(problem.op, problem.params().beta, dt, u, u, P);
    CostReport rep;
    rep.per_path.resize(P);
    double tr = 0.0, en = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        double t = 0.0;
        for (std::size_t i = 0; i < forward.tau_index[p]; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            t += dt * wg.cwiseProduct(forward.states[p].col(c) - y_d.row(c).transpose()).squaredNorm();
        }
        rep.per_path[p] = 0.5 * t + 0.5 * energy[p];
        tr += 0.5 * t;
        en += 0.5 * energy[p];
    }
    rep.tracking_term = tr / static_cast<double>(P);
    rep.energy_term = en / static_cast<double>(P);
    const auto est = mean_and_se(rep.per_path);
    rep.J = rep.tracking_term + rep.energy_term;
    rep.std_error = est.std_error;
    rep.tau_hit_fraction = forward.tau_hit_fraction();
    return rep;
}

Estimate gateaux_cost_derivative(const Problem& problem, const ForwardEnsemble& forward,
                                 const std::vector<Matrix>& linearized, const ControlPath& u, const ControlPath& v,
                                 const Matrix& y_d) {
    check_ensemble(problem, forward, y_d);
    check_linearized(forward, linearized);
    const std::size_t P = forward.paths();
    u.check(problem.grid().N, problem.dim(), P);
    v.check(problem.grid().N, problem.dim(), P);
    const double dt = problem.grid().dt();
    const Vector w2g = problem.op.power_weights(2.0 * problem.params().gamma);
    auto energy = ControlPath::inner_per_path(problem.op, problem.params().beta, dt, u, v, P);
    for (std::size_t p = 0; p < P; ++p) {
        double t = 0.0;
        for (std::size_t i = 0; i < forward.tau_index[p]; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            t += dt * w2g.cwiseProduct(forward.states[p].col(c) - y_d.row(c).transpose()).dot(linearized[p].col(c));
        }
        energy[p] += t;
    }
    return mean_and_se(energy);
}

double second_derivative(const Problem& problem, const ForwardEnsemble& forward, const std::vector<Matrix>& z1,
                         const std::vector<Matrix>& z2, const ControlPath& v1, const ControlPath& v2) {
    check_linearized(forward, z1);
    check_linearized(forward, z2);
    const std::size_t P = forward.paths();
    const double dt = problem.grid().dt();
    const Vector w2g = problem.op.power_weights(2.0 * problem.params().gamma);
    double total = ControlPath::inner(problem.op, problem.params().beta, dt, v1, v2, P);
    double t = 0.0;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i < forward.tau_index[p]; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            t += dt * w2g.cwiseProduct(z1[p].col(c)).dot(z2[p].col(c));
        }
    return total + t / static_cast<double>(P);
}

DualityReport duality_residual(const Problem& problem, const ForwardEnsemble& forward,
                               const std::vector<Matrix>& linearized, const BackwardSolution& backward,
                               const ControlPath& v, const Matrix& y_d) {
    check_ensemble(problem, forward, y_d);
    check_linearized(forward, linearized);
    const std::size_t P = forward.paths();
    if (backward.paths() != P) throw ValidationError("duality: backward solution has the wrong number of paths");
    v.check(problem.grid().N, problem.dim(), P);
    const double dt = problem.grid().dt();
    const Vector w2g = problem.op.power_weights(2.0 * problem.params().gamma);
    const Matrix& F = problem.forward.control_map;
    std::vector<double> l(P), r(P), d(P);
    for (std::size_t p = 0; p < P; ++p) {
        double a = 0.0, b = 0.0;
        const Matrix& vp = v.for_path(p);
        for (std::size_t i = 0; i < forward.tau_index[p]; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            a += dt * w2g.cwiseProduct(forward.states[p].col(c) - y_d.row(c).transpose()).dot(linearized[p].col(c));
            b += dt * backward.z_star[p].col(c).dot(F * vp.row(c).transpose());
        }
        l[p] = a;
        r[p] = b;
        d[p] = a - b;
    }
    DualityReport rep;
    rep.lhs = mean_and_se(l).value;
    rep.rhs = mean_and_se(r).value;
    rep.residual = std::abs(rep.lhs - rep.rhs);
    rep.std_error = mean_and_se(d).std_error;
    return rep;
}

ControlPath adjoint_descent_direction(const Problem& problem, const BackwardSolution& backward) {
    const std::size_t P = backward.paths();
    const std::size_t N = problem.grid().N;
    const Vector inv2b = problem.op.power_weights(-2.0 * problem.params().beta);
    const Matrix Ft = problem.forward.control_map.transpose();
    std::vector<Matrix> out(P);
    for (std::size_t p = 0; p < P; ++p) {
        // rows are steps: (-D_{-2b} F^T z*_i)^T
        const Matrix g = -(inv2b.asDiagonal() * (Ft * backward.z_star[p].leftCols(static_cast<Eigen::Index>(N))));
        out[p] = g.transpose();
    }
    if (P == 1) return ControlPath::deterministic(std::move(out[0]));
    return ControlPath::per_path(std::move(out), Adaptedness::feedback);
}

ControlPath cost_gradient(const Problem& problem, const BackwardSolution& backward, const ControlPath& u) {
    return ControlPath::combine(-1.0, adjoint_descent_direction(problem, backward), 1.0, u);
}

// ---------------------------------------------------------------- optimizer

OptimizeResult optimize(const Problem& problem, const BackwardConfig& backward_config, const AdmissibleSet& set,
                        const std::vector<WienerPath>& paths, const ControlPath& initial_u,
                        const OptimizeOptions& options) {
    if (!(options.step_rule.rho > 0.0 && options.step_rule.rho <= 1.0))
        throw ValidationError("optimize.rho must lie in (0, 1]");
    if (options.max_iter == 0) throw ValidationError("optimize.max_iter must be positive");
    ExponentParams bp = problem.params();
    bp.backward_mode = true;
    bp.validate();
    const std::size_t P = paths.size();
    const double dt = problem.grid().dt();
    const double beta = problem.params().beta;
    const Matrix& y_d = backward_config.y_d;

    OptimizeResult res;
    ControlPath u = initial_u;
    ForwardEnsemble fwd = run_forward(problem, paths, u);
    CostReport cost = evaluate_cost(problem, fwd, u, y_d);
    for (std::size_t k = 0;; ++k) {
        BackwardSolution bwd = solve_backward(backward_config, fwd, problem);
        ControlPath tu = project_admissible(set, problem.op, problem.grid(), adjoint_descent_direction(problem, bwd), P);
        const ControlPath diff = ControlPath::combine(1.0, tu, -1.0, u);
        const double fp = diff.norm(problem.op, beta, dt, P);

        HistoryRow row;
        row.iteration = k;
        row.J = cost.J;
        row.tracking = cost.tracking_term;
        row.energy = cost.energy_term;
        row.fixed_point_residual = fp;
        row.tau_hit_fraction = cost.tau_hit_fraction;
        row.cost_std_error = cost.std_error;

        const bool done = fp * options.step_rule.rho < options.tol || fp == 0.0;
        if (done || k >= options.max_iter) {
            res.converged = done;
            res.history.push_back(row);
            res.u_opt = std::move(tu);
            res.u_final = std::move(u);
            res.fixed_point_residual = fp;
            res.final_forward = std::move(fwd);
            res.final_backward = std::move(bwd);
            return res;
        }

        double rho = options.step_rule.rho;
        for (std::size_t h = 0;; ++h) {
            ControlPath cand = ControlPath::combine(1.0 - rho, u, rho, tu);
            ForwardEnsemble fc = run_forward(problem, paths, cand);
            CostReport cc = evaluate_cost(problem, fc, cand, y_d);
            double se = 0.0;
            if (P > 1) {
                std::vector<double> dj(P);
                for (std::size_t p = 0; p < P; ++p) dj[p] = cc.per_path[p] - cost.per_path[p];
                se = mean_and_se(dj).std_error;
            }
            const bool accept = !options.step_rule.backtracking || h >= options.step_rule.max_halvings ||
                                cc.J <= cost.J + options.step_rule.slack_se * se + 1e-14 * std::abs(cost.J);
            if (accept) {
                u = std::move(cand);
                fwd = std::move(fc);
                cost = cc;
                break;
            }
            rho *= 0.5;
        }
        row.rho = rho;
        res.history.push_back(row);
    }
}

SufficientConditionReport check_sufficient_condition(const Problem& problem, const ForwardEnsemble& forward_at_opt,
                                                     const ControlPath& u_opt,
                                                     const std::vector<ControlPath>& directions,
                                                     const std::vector<ControlPath>& admissible_samples,
                                                     const Matrix& y_d, double se_factor) {
    const std::size_t P = forward_at_opt.paths();
    const double dt = problem.grid().dt();
    const double beta = problem.params().beta;
    SufficientConditionReport rep;
    rep.all_passed = true;
    for (const auto& v : directions) {
        DirectionCheck d;
        const double nv = ControlPath::inner(problem.op, beta, dt, v, v, P);
        if (nv == 0.0) {
            d.skipped = true;
            d.passed = true;
            d.note = "zero direction, ratio undefined";
            rep.directions.push_back(d);
            continue;
        }
        const auto z = run_linearized(problem, forward_at_opt, v);
        d.ratio = second_derivative(problem, forward_at_opt, z, z, v, v) / nv;
        d.passed = d.ratio >= 1.0 - 1e-10;
        rep.all_passed = rep.all_passed && d.passed;
        rep.directions.push_back(d);
    }
    for (const auto& s : admissible_samples) {
        const ControlPath dir = ControlPath::combine(1.0, s, -1.0, u_opt);
        const auto z = run_linearized(problem, forward_at_opt, dir);
        const auto e = gateaux_cost_derivative(problem, forward_at_opt, z, u_opt, dir, y_d);
        VariationalCheck c;
        c.derivative = e.value;
        c.std_error = e.std_error;
        c.passed = e.value >= -se_factor * e.std_error - 1e-12 * (1.0 + std::abs(e.value));
        rep.all_passed = rep.all_passed && c.passed;
        rep.variational.push_back(c);
    }
    return rep;
}

}  // namespace gsmp

#include "gsmp/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsmp/errors.hpp"

namespace gsmp {

void ForwardConfig::validate(const SpectralOperator& op) const {
    params.validate();
    grid.validate();
    if (!(m_level > 0.0) || !std::isfinite(m_level)) throw ValidationError("forward.m_level must be positive");
    op.check_dim(xi);
    if (!xi.allFinite()) throw ValidationError("forward.xi must be finite");
    const auto K = static_cast<Eigen::Index>(op.dim());
    if (control_map.rows() != K || control_map.cols() != K)
        throw ValidationError("control.map must be K x K");
    if (!control_map.allFinite()) throw ValidationError("control.map must be finite");
}

double ForwardConfig::control_map_norm(const SpectralOperator& op) const {
    const Vector wb = op.power_weights(params.beta);
    const Matrix conj = wb.asDiagonal() * control_map * op.power_weights(-params.beta).asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(conj);
    return svd.singularValues()(0);
}

Vector default_initial_state(const SpectralOperator& op, double alpha, double norm) {
    const auto K = static_cast<Eigen::Index>(op.dim());
    Vector xi(K);
    for (Eigen::Index k = 0; k < K; ++k) xi(k) = 1.0 / static_cast<double>(k + 1);
    return xi * (norm / op.norm(alpha, xi));
}

void Problem::validate() const {
    forward.validate(op);
    if (tensor.dim() != op.dim()) throw ValidationError("tensor dimension differs from operator dimension");
    if (noise.dim() != op.dim()) throw ValidationError("noise state dimension differs from operator dimension");
}

// ---------------------------------------------------------------- ControlPath

ControlPath ControlPath::zero(std::size_t N, std::size_t K) {
    return deterministic(Matrix::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K)));
}

ControlPath ControlPath::deterministic(Matrix values) {
    if (!values.allFinite()) throw ValidationError("control: values must be finite");
    ControlPath c;
    c.values_.push_back(std::move(values));
    return c;
}

ControlPath ControlPath::per_path(std::vector<Matrix> values, Adaptedness tag) {
    if (values.empty()) throw ValidationError("control: need at least one path");
    for (const auto& v : values)
        if (v.rows() != values[0].rows() || v.cols() != values[0].cols())
            throw ValidationError("control: per-path arrays must share one shape");
    ControlPath c;
    c.values_ = std::move(values);
    c.per_path_ = true;
    c.tag_ = tag;
    return c;
}

const Matrix& ControlPath::for_path(std::size_t path) const {
    if (values_.empty()) throw ValidationError("control: empty control path");
    if (!is_per_path()) return values_[0];
    if (path >= values_.size()) throw ValidationError("control: no values for path " + std::to_string(path));
    return values_[path];
}

Matrix& ControlPath::mutable_path(std::size_t path) {
    return const_cast<Matrix&>(static_cast<const ControlPath&>(*this).for_path(path));
}

void ControlPath::check(std::size_t N, std::size_t K, std::size_t paths) const {
    if (values_.empty()) throw ValidationError("control: empty control path");
    if (steps() != N) throw ValidationError("control: expected " + std::to_string(N) + " steps, got " + std::to_string(steps()));
    if (dim() != K) throw ValidationError("control: expected dimension " + std::to_string(K));
    if (is_per_path() && values_.size() != paths)
        throw ValidationError("control: per-path control has " + std::to_string(values_.size()) +
                              " paths, ensemble has " + std::to_string(paths));
}

ControlPath ControlPath::combine(double a, const ControlPath& x, double b, const ControlPath& y) {
    if (x.steps() != y.steps() || x.dim() != y.dim()) throw ValidationError("control: shape mismatch in combination");
    if (!x.is_per_path() && !y.is_per_path()) return deterministic(a * x.values_[0] + b * y.values_[0]);
    const std::size_t P = std::max(x.is_per_path() ? x.path_count() : 0, y.is_per_path() ? y.path_count() : 0);
    if ((x.is_per_path() && x.path_count() != P) || (y.is_per_path() && y.path_count() != P))
        throw ValidationError("control: per-path counts differ");
    std::vector<Matrix> out(P);
    for (std::size_t p = 0; p < P; ++p) out[p] = a * x.for_path(p) + b * y.for_path(p);
    const Adaptedness tag = (x.tag_ == Adaptedness::feedback || y.tag_ == Adaptedness::feedback)
                                ? Adaptedness::feedback
                                : Adaptedness::open_loop;
    return per_path(std::move(out), tag);
}

std::vector<double> ControlPath::inner_per_path(const SpectralOperator& op, double beta, double dt,
                                                const ControlPath& x, const ControlPath& y, std::size_t paths) {
    const Vector w = op.power_weights(2.0 * beta);
    std::vector<double> out(paths);
    if (!x.is_per_path() && !y.is_per_path()) {
        const double v = dt * (x.values_[0] * w.asDiagonal()).cwiseProduct(y.values_[0]).sum();
        std::fill(out.begin(), out.end(), v);
        return out;
    }
    for (std::size_t p = 0; p < paths; ++p)
        out[p] = dt * (x.for_path(p) * w.asDiagonal()).cwiseProduct(y.for_path(p)).sum();
    return out;
}

double ControlPath::inner(const SpectralOperator& op, double beta, double dt, const ControlPath& x,
                          const ControlPath& y, std::size_t paths) {
    const auto v = inner_per_path(op, beta, dt, x, y, std::max<std::size_t>(paths, 1));
    double s = 0.0;
    for (double a : v) s += a;
    return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- ensemble

double ForwardEnsemble::tau_hit_fraction() const {
    if (tau_index.empty()) return 0.0;
    const auto hits = std::count_if(tau_index.begin(), tau_index.end(), [&](std::size_t t) { return t < grid.N; });
    return static_cast<double>(hits) / static_cast<double>(tau_index.size());
}

Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic, true> ForwardEnsemble::local_solution(std::size_t p) const {
    const Matrix& s = states.at(p);
    return s.leftCols(static_cast<Eigen::Index>(tau_index.at(p)));
}

// ---------------------------------------------------------------- stepping

namespace {

void check_path(const Problem& problem, const WienerPath& path) {
    if (!(path.grid == problem.grid())) throw ValidationError("forward: Wiener path grid differs from the config grid");
    if (path.modes() != problem.noise.modes()) throw ValidationError("forward: Wiener path has the wrong number of noise modes");
}

void check_control(const Problem& problem, const Matrix& control, const char* what) {
    if (static_cast<std::size_t>(control.rows()) != problem.grid().N ||
        static_cast<std::size_t>(control.cols()) != problem.dim())
        throw ValidationError(std::string("forward: ") + what + " must be N x K");
}

}  // namespace

ForwardTrajectory step_forward(const Problem& problem, const WienerPath& path, const Matrix& control) {
    check_path(problem, path);
    check_control(problem, control, "control");
    const auto& op = problem.op;
    const std::size_t N = problem.grid().N;
    const double dt = problem.grid().dt();
    const double m = problem.forward.m_level;
    const Vector decay = op.semigroup_weights(dt);
    const Vector wa = op.power_weights(problem.params().alpha);
    const Matrix& F = problem.forward.control_map;
    const bool has_b = !problem.tensor.is_zero();
    const bool has_g = !problem.noise.is_zero();

    ForwardTrajectory out;
    out.states.resize(static_cast<Eigen::Index>(op.dim()), static_cast<Eigen::Index>(N + 1));
    out.states.col(0) = problem.forward.xi;
    out.tau = N;
    bool stopped = false;
    Vector y = problem.forward.xi;
    Vector yp(y.size());
    for (std::size_t i = 0; i <= N; ++i) {
        if (!stopped && wa.cwiseProduct(y).norm() > m) {
            out.tau = i;
            stopped = true;
        }
        if (i == N) break;
        Vector rhs = y;
        if (has_b) {
            yp = y;
            truncate_in_place(yp, wa, m);
            rhs.noalias() -= dt * problem.tensor.apply(yp, yp);
        }
        rhs.noalias() += dt * (F * control.row(static_cast<Eigen::Index>(i)).transpose());
        if (has_g) rhs.noalias() += problem.noise.apply(y) * path.standard(i);
        y = decay.cwiseProduct(rhs);
        if (!y.allFinite()) throw BlowUpError(path.path_index, i + 1);
        out.states.col(static_cast<Eigen::Index>(i + 1)) = y;
    }
    return out;
}

Matrix step_linearized(const Problem& problem, const WienerPath& path, const Matrix& base_states,
                       const Matrix& direction) {
    check_path(problem, path);
    check_control(problem, direction, "direction");
    const auto& op = problem.op;
    const std::size_t N = problem.grid().N;
    if (static_cast<std::size_t>(base_states.rows()) != op.dim() ||
        static_cast<std::size_t>(base_states.cols()) != N + 1)
        throw ValidationError("linearized: base trajectory must be K x (N+1)");
    const double dt = problem.grid().dt();
    const double m = problem.forward.m_level;
    const Vector decay = op.semigroup_weights(dt);
    const Vector wa = op.power_weights(problem.params().alpha);
    const Matrix& F = problem.forward.control_map;
    const bool has_b = !problem.tensor.is_zero();
    const bool has_g = problem.noise.has_linear_part();

    Matrix z(static_cast<Eigen::Index>(op.dim()), static_cast<Eigen::Index>(N + 1));
    z.col(0).setZero();
    Vector zi = Vector::Zero(static_cast<Eigen::Index>(op.dim()));
    Vector yp(zi.size());
    for (std::size_t i = 0; i < N; ++i) {
        Vector rhs = zi;
        if (has_b) {
            yp = base_states.col(static_cast<Eigen::Index>(i));
            truncate_in_place(yp, wa, m);
            rhs.noalias() -= dt * (problem.tensor.linearization(yp) * zi);
        }
        rhs.noalias() += dt * (F * direction.row(static_cast<Eigen::Index>(i)).transpose());
        if (has_g) rhs.noalias() += problem.noise.apply_linear_times(zi, path.standard(i));
        zi = decay.cwiseProduct(rhs);
        if (!zi.allFinite()) throw BlowUpError(path.path_index, i + 1);
        z.col(static_cast<Eigen::Index>(i + 1)) = zi;
    }
    return z;
}

std::vector<WienerPath> sample_paths(const Problem& problem, std::size_t paths, std::uint64_t seed) {
    if (paths == 0) throw ValidationError("ensemble: need at least one path");
    std::vector<WienerPath> out;
    out.reserve(paths);
    for (std::size_t p = 0; p < paths; ++p) out.push_back(sample_wiener(problem.noise, problem.grid(), seed, p));
    return out;
}

ForwardEnsemble run_forward(const Problem& problem, const std::vector<WienerPath>& paths, const ControlPath& control) {
    problem.validate();
    control.check(problem.grid().N, problem.dim(), paths.size());
    ForwardEnsemble ens;
    ens.grid = problem.grid();
    ens.wiener = paths;
    ens.states.reserve(paths.size());
    ens.tau_index.reserve(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        auto traj = step_forward(problem, paths[p], control.for_path(p));
        ens.states.push_back(std::move(traj.states));
        ens.tau_index.push_back(traj.tau);
    }
    return ens;
}

std::vector<Matrix> run_linearized(const Problem& problem, const ForwardEnsemble& forward,
                                   const ControlPath& direction) {
    direction.check(problem.grid().N, problem.dim(), forward.paths());
    std::vector<Matrix> out;
    out.reserve(forward.paths());
    for (std::size_t p = 0; p < forward.paths(); ++p)
        out.push_back(step_linearized(problem, forward.wiener[p], forward.states[p], direction.for_path(p)));
    return out;
}

std::vector<GateauxRow> gateaux_check(const Problem& problem, const std::vector<WienerPath>& paths,
                                      const ControlPath& u, const ControlPath& v,
                                      const std::vector<double>& thetas) {
    problem.validate();
    u.check(problem.grid().N, problem.dim(), paths.size());
    v.check(problem.grid().N, problem.dim(), paths.size());
    for (double th : thetas)
        if (!(th != 0.0) || !std::isfinite(th)) throw ValidationError("gateaux: theta must be finite and nonzero");
    const Vector wa = problem.op.power_weights(problem.params().alpha);
    std::vector<GateauxRow> rows(thetas.size());
    for (std::size_t t = 0; t < thetas.size(); ++t) rows[t].theta = thetas[t];
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto base = step_forward(problem, paths[p], u.for_path(p));
        const Matrix z = step_linearized(problem, paths[p], base.states, v.for_path(p));
        for (std::size_t t = 0; t < thetas.size(); ++t) {
            const double th = thetas[t];
            const Matrix shifted = u.for_path(p) + th * v.for_path(p);
            const auto pert = step_forward(problem, paths[p], shifted);
            const std::size_t stop = std::min(base.tau, pert.tau);
            double sup = 0.0;
            for (std::size_t i = 0; i < stop; ++i) {
                const auto c = static_cast<Eigen::Index>(i);
                const Vector q = (pert.states.col(c) - base.states.col(c)) / th - z.col(c);
                sup = std::max(sup, wa.cwiseProduct(q).squaredNorm());
            }
            rows[t].mean_sq_error += sup;
            if (pert.tau != base.tau) rows[t].tau_change_fraction += 1.0;
        }
    }
    const double P = static_cast<double>(paths.size());
    for (auto& r : rows) {
        r.mean_sq_error /= P;
        r.tau_change_fraction /= P;
        r.rms_error = std::sqrt(r.mean_sq_error);
    }
    return rows;
}

}  // namespace gsmp

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gsmp/bilinear.hpp"
#include "gsmp/exponents.hpp"
#include "gsmp/noise.hpp"
#include "gsmp/spectral_operator.hpp"
#include "gsmp/wiener.hpp"

namespace gsmp {

struct ForwardConfig {
    ExponentParams params;
    double m_level = 10.0;
    TimeGrid grid;
    Vector xi;
    /// Control-to-state map F acting on coefficients.
    Matrix control_map;

    /// Checks exponents, radius, grid and dimensions against `op`.
    void validate(const SpectralOperator& op) const;
    /// Operator norm of F on D(A^beta).
    [[nodiscard]] double control_map_norm(const SpectralOperator& op) const;
};

/// xi_k proportional to 1/k, scaled to the given D(A^alpha) norm.
[[nodiscard]] Vector default_initial_state(const SpectralOperator& op, double alpha, double norm);

/// Everything the forward and backward solvers need about the dynamics.
struct Problem {
    SpectralOperator op;
    BilinearTensor tensor;
    NoiseModel noise;
    ForwardConfig forward;

    void validate() const;
    [[nodiscard]] std::size_t dim() const noexcept { return op.dim(); }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return forward.grid; }
    [[nodiscard]] const ExponentParams& params() const noexcept { return forward.params; }
};

enum class Adaptedness { open_loop, feedback };

/// Control values u_0..u_{N-1}, either one N x K array shared by all paths
/// or one array per path.
class ControlPath {
public:
    ControlPath() = default;
    static ControlPath zero(std::size_t N, std::size_t K);
    static ControlPath deterministic(Matrix values);
    static ControlPath per_path(std::vector<Matrix> values, Adaptedness tag = Adaptedness::feedback);

    [[nodiscard]] bool is_per_path() const noexcept { return values_.size() > 1 || per_path_; }
    [[nodiscard]] std::size_t path_count() const noexcept { return values_.size(); }
    [[nodiscard]] std::size_t steps() const noexcept { return values_.empty() ? 0 : static_cast<std::size_t>(values_[0].rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return values_.empty() ? 0 : static_cast<std::size_t>(values_[0].cols()); }
    [[nodiscard]] Adaptedness adapted_tag() const noexcept { return tag_; }
    /// N x K array used by `path` (the shared one for deterministic controls).
    [[nodiscard]] const Matrix& for_path(std::size_t path) const;
    [[nodiscard]] Matrix& mutable_path(std::size_t path);
    [[nodiscard]] Vector at(std::size_t path, std::size_t step) const {
        return for_path(path).row(static_cast<Eigen::Index>(step)).transpose();
    }

    /// Checks step count and dimension, and the path count against an ensemble of `paths`.
    void check(std::size_t N, std::size_t K, std::size_t paths) const;

    /// a*x + b*y with broadcasting of deterministic controls.
    [[nodiscard]] static ControlPath combine(double a, const ControlPath& x, double b, const ControlPath& y);
    /// E sum_i dt <A^beta x_i, A^beta y_i> over `paths` paths.
    [[nodiscard]] static double inner(const SpectralOperator& op, double beta, double dt, const ControlPath& x,
                                      const ControlPath& y, std::size_t paths);
    /// Per-path values of sum_i dt <A^beta x_i, A^beta y_i>.
    [[nodiscard]] static std::vector<double> inner_per_path(const SpectralOperator& op, double beta, double dt,
                                                            const ControlPath& x, const ControlPath& y,
                                                            std::size_t paths);
    [[nodiscard]] double norm(const SpectralOperator& op, double beta, double dt, std::size_t paths) const {
        return std::sqrt(inner(op, beta, dt, *this, *this, paths));
    }

private:
    std::vector<Matrix> values_;
    bool per_path_ = false;
    Adaptedness tag_ = Adaptedness::open_loop;
};

/// One forward path: states y_0..y_N as columns and the stopping index.
struct ForwardTrajectory {
    Matrix states;  // K x (N+1)
    std::size_t tau = 0;
};

struct ForwardEnsemble {
    TimeGrid grid;
    std::vector<WienerPath> wiener;
    std::vector<Matrix> states;  // per path, K x (N+1)
    std::vector<std::size_t> tau_index;

    [[nodiscard]] std::size_t paths() const noexcept { return states.size(); }
    [[nodiscard]] std::size_t dim() const noexcept {
        return states.empty() ? 0 : static_cast<std::size_t>(states[0].rows());
    }
    /// Fraction of paths stopped before the horizon.
    [[nodiscard]] double tau_hit_fraction() const;
    /// Columns 0..tau-1 of path p, the local solution.
    [[nodiscard]] Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic, true> local_solution(std::size_t p) const;
};

/// Exponential Euler step of the truncated system along one path.
[[nodiscard]] ForwardTrajectory step_forward(const Problem& problem, const WienerPath& path, const Matrix& control);
/// Linearized sensitivity z along the base trajectory, z_0 = 0.
[[nodiscard]] Matrix step_linearized(const Problem& problem, const WienerPath& path, const Matrix& base_states,
                                     const Matrix& direction);

/// Samples `paths` Wiener paths from (seed, 0..paths-1).
[[nodiscard]] std::vector<WienerPath> sample_paths(const Problem& problem, std::size_t paths, std::uint64_t seed);
[[nodiscard]] ForwardEnsemble run_forward(const Problem& problem, const std::vector<WienerPath>& paths,
                                          const ControlPath& control);
[[nodiscard]] std::vector<Matrix> run_linearized(const Problem& problem, const ForwardEnsemble& forward,
                                                 const ControlPath& direction);

struct GateauxRow {
    double theta = 0.0;
    /// E sup_{i < tau ^ tau'} ||(y(u + theta v) - y(u))/theta - z||^2_{D(A^alpha)}
    double mean_sq_error = 0.0;
    double rms_error = 0.0;
    /// Paths whose stopping index changed under the perturbation.
    double tau_change_fraction = 0.0;
};

/// Difference-quotient ladder for the state derivative under common random numbers.
[[nodiscard]] std::vector<GateauxRow> gateaux_check(const Problem& problem, const std::vector<WienerPath>& paths,
                                                    const ControlPath& u, const ControlPath& v,
                                                    const std::vector<double>& thetas);

}  // namespace gsmp

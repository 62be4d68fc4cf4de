#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsmp/backward.hpp"
#include "gsmp/forward.hpp"

namespace gsmp {

class AdmissibleSet {
public:
    enum class Variant { norm_ball, pointwise_ball, box };

    /// Ball of radius R in L^2(Omega x [0,T]; D(A^beta)).
    static AdmissibleSet norm_ball(double R, double beta);
    /// Ball of radius r in D(A^beta) at every (path, step).
    static AdmissibleSet pointwise_ball(double r, double beta);
    /// lo_k <= u_k <= hi_k per coefficient; must contain 0.
    static AdmissibleSet box(Vector lo, Vector hi, double beta);

    [[nodiscard]] Variant variant() const noexcept { return variant_; }
    [[nodiscard]] double radius() const noexcept { return radius_; }
    [[nodiscard]] const Vector& lo() const noexcept { return lo_; }
    [[nodiscard]] const Vector& hi() const noexcept { return hi_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    void validate(std::size_t K) const;

private:
    Variant variant_ = Variant::norm_ball;
    double radius_ = 1.0;
    Vector lo_, hi_;
    double beta_ = 0.0;
};

[[nodiscard]] std::string to_string(AdmissibleSet::Variant v);

/// Nearest point of the set in the D(A^beta)-weighted L^2 inner product.
[[nodiscard]] ControlPath project_admissible(const AdmissibleSet& set, const SpectralOperator& op,
                                             const TimeGrid& grid, const ControlPath& v, std::size_t paths);
/// Random deterministic element of the set.
[[nodiscard]] ControlPath sample_admissible(const AdmissibleSet& set, const SpectralOperator& op,
                                            const TimeGrid& grid, std::uint64_t seed);

struct CostReport {
    double J = 0.0;
    double tracking_term = 0.0;
    double energy_term = 0.0;
    double tau_hit_fraction = 0.0;
    double std_error = 0.0;
    std::vector<double> per_path;
};

/// Tracking over steps before each path's stopping index plus energy over the full grid.
[[nodiscard]] CostReport evaluate_cost(const Problem& problem, const ForwardEnsemble& forward, const ControlPath& u,
                                       const Matrix& y_d);

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// E sum_{i<tau} dt <A^gamma (y - y_d), A^gamma z> + E sum_i dt <A^beta u, A^beta v>.
[[nodiscard]] Estimate gateaux_cost_derivative(const Problem& problem, const ForwardEnsemble& forward,
                                               const std::vector<Matrix>& linearized, const ControlPath& u,
                                               const ControlPath& v, const Matrix& y_d);

/// E sum_{i<tau} dt <A^gamma z1, A^gamma z2> + E sum_i dt <A^beta v1, A^beta v2>.
[[nodiscard]] double second_derivative(const Problem& problem, const ForwardEnsemble& forward,
                                       const std::vector<Matrix>& z1, const std::vector<Matrix>& z2,
                                       const ControlPath& v1, const ControlPath& v2);

struct DualityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double std_error = 0.0;
};

/// Pairing of the tracking error with z against the pairing of z* with F v, both before tau.
[[nodiscard]] DualityReport duality_residual(const Problem& problem, const ForwardEnsemble& forward,
                                             const std::vector<Matrix>& linearized, const BackwardSolution& backward,
                                             const ControlPath& v, const Matrix& y_d);

/// -F* A^{-2 beta} z* per path and step, with F* the D(A^beta)-adjoint of F.
[[nodiscard]] ControlPath adjoint_descent_direction(const Problem& problem, const BackwardSolution& backward);
/// Gradient representative F* A^{-2 beta} z* + u in D(A^beta).
[[nodiscard]] ControlPath cost_gradient(const Problem& problem, const BackwardSolution& backward, const ControlPath& u);

struct StepRule {
    double rho = 0.5;
    bool backtracking = true;
    std::size_t max_halvings = 12;
    /// Accept a step if J does not rise by more than this many standard errors of the change.
    double slack_se = 2.0;
};

struct OptimizeOptions {
    std::size_t max_iter = 100;
    double tol = 1e-8;
    StepRule step_rule;
};

struct HistoryRow {
    std::size_t iteration = 0;
    double J = 0.0;
    double tracking = 0.0;
    double energy = 0.0;
    double fixed_point_residual = 0.0;
    double tau_hit_fraction = 0.0;
    double rho = 0.0;
    double cost_std_error = 0.0;
};

struct OptimizeResult {
    /// T(u_final) = P_U(-F* A^{-2 beta} z*(u_final)).
    ControlPath u_opt;
    ControlPath u_final;
    std::vector<HistoryRow> history;
    /// ||u_final - T(u_final)|| in L^2(Omega x [0,T]; D(A^beta)).
    double fixed_point_residual = 0.0;
    bool converged = false;
    ForwardEnsemble final_forward;
    BackwardSolution final_backward;
};

/// Damped projected fixed-point iteration u <- (1 - rho) u + rho T(u) under common random numbers.
[[nodiscard]] OptimizeResult optimize(const Problem& problem, const BackwardConfig& backward_config,
                                      const AdmissibleSet& set, const std::vector<WienerPath>& paths,
                                      const ControlPath& initial_u, const OptimizeOptions& options);

struct DirectionCheck {
    double ratio = 0.0;  // d2J[v,v] / ||v||^2
    bool skipped = false;
    bool passed = false;
    std::string note;
};

struct VariationalCheck {
    double derivative = 0.0;
    double std_error = 0.0;
    bool passed = false;
};

struct SufficientConditionReport {
    std::vector<DirectionCheck> directions;
    std::vector<VariationalCheck> variational;
    bool all_passed = false;
};

/// Coercivity d2J[v,v] >= ||v||^2 per direction and dJ(u_opt)[u - u_opt] >= -se_factor * SE per sample u.
[[nodiscard]] SufficientConditionReport check_sufficient_condition(
    const Problem& problem, const ForwardEnsemble& forward_at_opt, const ControlPath& u_opt,
    const std::vector<ControlPath>& directions, const std::vector<ControlPath>& admissible_samples,
    const Matrix& y_d, double se_factor = 2.0);

}  // namespace gsmp

#include <cmath>

#include "doctest.h"
#include "gsmp/errors.hpp"
#include "helpers.hpp"

using namespace gsmp;
using testutil::random_matrix;

namespace {

Matrix uncontrolled_target(const Problem& problem, const ForwardEnsemble& fwd) {
    return fwd.states[0].leftCols(static_cast<Eigen::Index>(problem.grid().N)).transpose();
}

}  // namespace

TEST_CASE("cost of the trivial configuration is zero") {
    auto problem = testutil::scalar_problem(1.0, 1.0, 16, NoiseModel::none(1, 0.45), 0.0);
    const auto paths = sample_paths(problem, 1, 1);
    const auto u = ControlPath::zero(16, 1);
    const auto fwd = run_forward(problem, paths, u);
    const auto cost = evaluate_cost(problem, fwd, u, Matrix::Zero(16, 1));
    CHECK(cost.J == 0.0);
    CHECK(cost.tau_hit_fraction == 0.0);
}

TEST_CASE("deterministic cost matches single-path quadrature") {
    const double lam = 3.0;
    auto problem = testutil::scalar_problem(lam, 1.0, 64, NoiseModel::none(1, 0.45), 1.0);
    const auto paths = sample_paths(problem, 1, 1);
    const auto u = ControlPath::deterministic(Matrix::Constant(64, 1, 0.5));
    const auto fwd = run_forward(problem, paths, u);
    const Matrix y_d = Matrix::Constant(64, 1, 0.2);
    const auto cost = evaluate_cost(problem, fwd, u, y_d);
    const double dt = problem.grid().dt();
    const double wg = std::pow(lam, 2.0 * problem.params().gamma), wb = std::pow(lam, 2.0 * problem.params().beta);
    double tracking = 0.0;
    for (int i = 0; i < 64; ++i) tracking += 0.5 * dt * wg * std::pow(fwd.states[0](0, i) - 0.2, 2);
    CHECK(cost.tracking_term == doctest::Approx(tracking).epsilon(1e-14));
    CHECK(cost.energy_term == doctest::Approx(0.5 * wb * 0.25).epsilon(1e-14));
    CHECK(cost.J == doctest::Approx(cost.tracking_term + cost.energy_term).epsilon(1e-15));
}

TEST_CASE("doubling the control quadruples the energy term") {
    auto problem = testutil::synthetic_problem(4, 32, 0.1);
    const auto paths = sample_paths(problem, 20, 2);
    std::mt19937_64 rng(2);
    const auto u = ControlPath::deterministic(random_matrix(rng, 32, 4, 0.1));
    const auto u2 = ControlPath::combine(2.0, u, 0.0, u);
    const auto c1 = evaluate_cost(problem, run_forward(problem, paths, u), u, Matrix::Zero(32, 4));
    const auto c2 = evaluate_cost(problem, run_forward(problem, paths, u2), u2, Matrix::Zero(32, 4));
    CHECK(c2.energy_term == doctest::Approx(4.0 * c1.energy_term).epsilon(1e-14));
}

TEST_CASE("cost input validation") {
    auto problem = testutil::synthetic_problem(3, 8, 0.1);
    const auto paths = sample_paths(problem, 2, 1);
    const auto fwd = run_forward(problem, paths, ControlPath::zero(8, 3));
    CHECK_THROWS_AS((void)evaluate_cost(problem, fwd, ControlPath::zero(8, 3), Matrix::Zero(7, 3)), ValidationError);
    CHECK_THROWS_AS((void)evaluate_cost(problem, fwd, ControlPath::zero(8, 2), Matrix::Zero(8, 3)), ValidationError);
}

TEST_CASE("cost derivative examples") {
    auto problem = testutil::synthetic_problem(4, 64, 0.0);
    const auto paths = sample_paths(problem, 1, 3);
    const auto u = ControlPath::zero(64, 4);
    const auto fwd = run_forward(problem, paths, u);
    std::mt19937_64 rng(3);
    const auto v = ControlPath::deterministic(random_matrix(rng, 64, 4));
    const auto z = run_linearized(problem, fwd, v);

    const auto zero_dir = ControlPath::zero(64, 4);
    CHECK(gateaux_cost_derivative(problem, fwd, run_linearized(problem, fwd, zero_dir), u, zero_dir, Matrix::Zero(64, 4)).value == 0.0);
    CHECK(gateaux_cost_derivative(problem, fwd, z, u, v, uncontrolled_target(problem, fwd)).value == 0.0);

    // a sign-definite direction against an offset target keeps the first-order term dominant
    const Matrix y_d = -Matrix::Ones(64, 4);
    const auto w = ControlPath::deterministic(Matrix::Ones(64, 4));
    const double der = gateaux_cost_derivative(problem, fwd, run_linearized(problem, fwd, w), u, w, y_d).value;
    const double theta = 1e-4;
    const auto shifted = ControlPath::combine(1.0, u, theta, w);
    const double q = (evaluate_cost(problem, run_forward(problem, paths, shifted), shifted, y_d).J -
                      evaluate_cost(problem, fwd, u, y_d).J) / theta;
    CHECK(std::abs(q - der) / std::abs(der) < 1e-3);
}

TEST_CASE("second derivative examples") {
    auto problem = testutil::synthetic_problem(4, 32, 0.1);
    const auto paths = sample_paths(problem, 50, 4);
    const auto fwd = run_forward(problem, paths, ControlPath::zero(32, 4));
    std::mt19937_64 rng(4);
    const auto v1 = ControlPath::deterministic(random_matrix(rng, 32, 4));
    const auto v2 = ControlPath::deterministic(random_matrix(rng, 32, 4));
    const auto z1 = run_linearized(problem, fwd, v1), z2 = run_linearized(problem, fwd, v2);
    const double a = second_derivative(problem, fwd, z1, z2, v1, v2);
    const double b = second_derivative(problem, fwd, z2, z1, v2, v1);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    const auto zero = ControlPath::zero(32, 4);
    CHECK(second_derivative(problem, fwd, z1, run_linearized(problem, fwd, zero), v1, zero) == 0.0);
    const double vv = std::pow(v1.norm(problem.op, problem.params().beta, problem.grid().dt(), 50), 2);
    CHECK(second_derivative(problem, fwd, z1, z1, v1, v1) >= vv);
}

TEST_CASE("duality with a zero direction") {
    auto problem = testutil::synthetic_problem(4, 16, 0.2);
    const auto paths = sample_paths(problem, 100, 5);
    const auto fwd = run_forward(problem, paths, ControlPath::zero(16, 4));
    const auto bwd = solve_backward(testutil::backward_config(problem), fwd, problem);
    const auto v = ControlPath::zero(16, 4);
    const auto d = duality_residual(problem, fwd, run_linearized(problem, fwd, v), bwd, v, Matrix::Zero(16, 4));
    CHECK(d.lhs == 0.0);
    CHECK(d.rhs == 0.0);
    CHECK(d.residual == 0.0);
}

TEST_CASE("duality and gradient representation on a stochastic problem") {
    auto problem = testutil::synthetic_problem(4, 32, 0.2);
    const auto paths = sample_paths(problem, 1000, 6);
    const auto u = ControlPath::zero(32, 4);
    const auto fwd = run_forward(problem, paths, u);
    const auto bc = testutil::backward_config(problem);
    const auto bwd = solve_backward(bc, fwd, problem);
    std::mt19937_64 rng(6);
    const auto v = ControlPath::deterministic(random_matrix(rng, 32, 4));
    const auto z = run_linearized(problem, fwd, v);
    const auto d = duality_residual(problem, fwd, z, bwd, v, bc.y_d);
    CHECK(d.residual < 3.0 * d.std_error);
    const auto dj = gateaux_cost_derivative(problem, fwd, z, u, v, bc.y_d);
    const double rep = ControlPath::inner(problem.op, problem.params().beta, problem.grid().dt(),
                                          cost_gradient(problem, bwd, u), v, 1000);
    CHECK(std::abs(dj.value - rep) < 3.0 * d.std_error + 1e-14);
}

TEST_CASE("projection examples") {
    const auto op = SpectralOperator::synthetic(3);
    const TimeGrid grid(1.0, 10);
    std::mt19937_64 rng(7);
    const auto v = ControlPath::deterministic(random_matrix(rng, 10, 3));
    const double n = v.norm(op, 0.45, grid.dt(), 1);

    const auto big = AdmissibleSet::norm_ball(2.0 * n, 0.45);
    CHECK((project_admissible(big, op, grid, v, 1).for_path(0) - v.for_path(0)).norm() == 0.0);
    const auto half = AdmissibleSet::norm_ball(0.5 * n, 0.45);
    CHECK((project_admissible(half, op, grid, v, 1).for_path(0) - 0.5 * v.for_path(0)).norm() < 1e-14);

    const auto pw = AdmissibleSet::pointwise_ball(0.3, 0.45);
    const auto ppw = project_admissible(pw, op, grid, v, 1);
    const Vector wb = op.power_weights(0.45);
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(ppw.for_path(0).row(i).transpose().cwiseProduct(wb).norm() <= 0.3 + 1e-14);

    const auto box = AdmissibleSet::box(Vector::Constant(3, -0.2), Vector::Constant(3, 0.1), 0.45);
    const auto pb = project_admissible(box, op, grid, v, 1);
    CHECK(pb.for_path(0).maxCoeff() <= 0.1);
    CHECK(pb.for_path(0).minCoeff() >= -0.2);

    for (const auto& set : {half, pw, box}) {
        const auto p = project_admissible(set, op, grid, v, 1);
        CHECK((project_admissible(set, op, grid, p, 1).for_path(0) - p.for_path(0)).norm() < 1e-14);
        const auto r = ControlPath::combine(1.0, v, -1.0, p);
        for (int s = 0; s < 100; ++s) {
            const auto w = sample_admissible(set, op, grid, static_cast<std::uint64_t>(s));
            REQUIRE(ControlPath::inner(op, 0.45, grid.dt(), r, ControlPath::combine(1.0, w, -1.0, p), 1) <= 1e-12);
        }
    }
}

TEST_CASE("admissible set validation") {
    CHECK_THROWS_AS(AdmissibleSet::norm_ball(0.0, 0.45), ValidationError);
    CHECK_THROWS_AS(AdmissibleSet::pointwise_ball(-1.0, 0.45), ValidationError);
    CHECK_THROWS_AS(AdmissibleSet::box(Vector::Constant(2, 0.1), Vector::Constant(2, 0.5), 0.45), ValidationError);
    CHECK_THROWS_AS(AdmissibleSet::box(Vector::Constant(2, -0.1), Vector::Constant(3, 0.5), 0.45), ValidationError);
    const auto box = AdmissibleSet::box(Vector::Constant(2, -0.1), Vector::Constant(2, 0.5), 0.45);
    CHECK_THROWS_AS(box.validate(3), ValidationError);
}

TEST_CASE("optimizer: uncontrolled target is optimal at zero") {
    auto problem = testutil::synthetic_problem(4, 32, 0.0);
    const auto paths = sample_paths(problem, 1, 8);
    const auto fwd = run_forward(problem, paths, ControlPath::zero(32, 4));
    const auto bc = testutil::backward_config(problem, uncontrolled_target(problem, fwd));
    const auto res = optimize(problem, bc, AdmissibleSet::norm_ball(1e6, 0.45), paths, ControlPath::zero(32, 4),
                              OptimizeOptions{});
    CHECK(res.converged);
    CHECK(res.u_opt.norm(problem.op, 0.45, problem.grid().dt(), 1) < 1e-6);
}

TEST_CASE("optimizer: cost non-increasing within two standard errors") {
    auto problem = testutil::synthetic_problem(4, 32, 0.2);
    problem.forward.xi *= 3.0;
    const auto paths = sample_paths(problem, 300, 9);
    const auto bc = testutil::backward_config(problem);
    OptimizeOptions opt;
    opt.max_iter = 40;
    opt.tol = 1e-7;
    const auto res = optimize(problem, bc, AdmissibleSet::norm_ball(1e6, 0.45), paths, ControlPath::zero(32, 4), opt);
    CHECK(res.converged);
    CHECK(opt.step_rule.rho * res.fixed_point_residual < 1e-7);
    for (std::size_t k = 1; k < res.history.size(); ++k)
        CHECK(res.history[k].J <= res.history[k - 1].J + 2.0 * res.history[k - 1].cost_std_error);
    CHECK(res.history.back().J < res.history.front().J);
}

TEST_CASE("optimizer with a binding constraint stays admissible") {
    auto problem = testutil::synthetic_problem(4, 32, 0.0);
    problem.forward.xi *= 3.0;
    const auto paths = sample_paths(problem, 1, 10);
    const auto bc = testutil::backward_config(problem);
    const auto set = AdmissibleSet::norm_ball(1e-3, 0.45);
    const auto res = optimize(problem, bc, set, paths, ControlPath::zero(32, 4), OptimizeOptions{});
    CHECK(res.converged);
    CHECK(res.u_opt.norm(problem.op, 0.45, problem.grid().dt(), 1) <= 1e-3 * (1.0 + 1e-12));
    CHECK(res.u_opt.norm(problem.op, 0.45, problem.grid().dt(), 1) >= 1e-3 * (1.0 - 1e-6));
}

TEST_CASE("optimizer option validation") {
    auto problem = testutil::synthetic_problem(3, 8, 0.0);
    const auto paths = sample_paths(problem, 1, 1);
    OptimizeOptions opt;
    opt.step_rule.rho = 0.0;
    CHECK_THROWS_AS((void)optimize(problem, testutil::backward_config(problem), AdmissibleSet::norm_ball(1.0, 0.45), paths,
                                   ControlPath::zero(8, 3), opt),
                    ValidationError);
}

TEST_CASE("sufficient condition report") {
    auto problem = testutil::synthetic_problem(4, 32, 0.1);
    const auto paths = sample_paths(problem, 200, 11);
    const auto bc = testutil::backward_config(problem);
    const auto set = AdmissibleSet::norm_ball(1e6, 0.45);
    const auto res = optimize(problem, bc, set, paths, ControlPath::zero(32, 4), OptimizeOptions{});
    std::mt19937_64 rng(11);
    std::vector<ControlPath> dirs{ControlPath::zero(32, 4)};
    for (int s = 0; s < 5; ++s) dirs.push_back(ControlPath::deterministic(random_matrix(rng, 32, 4)));
    std::vector<ControlPath> samples;
    for (int s = 0; s < 10; ++s) samples.push_back(sample_admissible(AdmissibleSet::norm_ball(1.0, 0.45), problem.op, problem.grid(), 100 + s));
    const auto fwd = run_forward(problem, paths, res.u_opt);
    const auto rep = check_sufficient_condition(problem, fwd, res.u_opt, dirs, samples, bc.y_d);
    CHECK(rep.directions[0].skipped);
    CHECK(!rep.directions[0].note.empty());
    for (std::size_t k = 1; k < rep.directions.size(); ++k) CHECK(rep.directions[k].ratio >= 1.0 - 1e-10);
    for (const auto& vc : rep.variational) CHECK(vc.passed);
    CHECK(rep.all_passed);
}

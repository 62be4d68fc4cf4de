#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsmp/backward.hpp"
#include "gsmp/bilinear.hpp"
#include "gsmp/control.hpp"
#include "gsmp/forward.hpp"

namespace gsmp::harness {

struct OperatorSpec {
    TensorKind instantiation = TensorKind::fourier2d;
    std::size_t K = 16;
    /// Synthetic eigenvalues; empty means lambda_k = k.
    std::vector<double> eigenvalues;
    std::uint64_t tensor_seed = 11;
    double tensor_scale = 0.1;
    bool tensor_skew = true;
    std::size_t m_tilde_samples = 10000;
    /// Negative control: perturb the cached adjoint layout of the tensor.
    bool corrupt_adjoint = false;
};

struct NoiseSpec {
    std::string kind = "multiplicative";  // multiplicative | additive | none
    std::size_t J = 4;
    std::vector<double> mu;               // empty means mu_j = 2^{-j}
    double sigma = 0.1;
    double additive_scale = 0.1;
};

struct ControlSpec {
    std::string map = "identity";         // identity | scaled
    double map_scale = 1.0;
    std::string initial = "zero";         // zero | constant
    double initial_value = 0.0;
    std::string direction = "smooth";     // smooth | random | constant
    std::uint64_t direction_seed = 5;
};

struct AdmissibleSpec {
    std::string variant = "norm_ball";    // norm_ball | pointwise_ball | box
    double radius = 1e6;
    double lo = -1e6;
    double hi = 1e6;
};

struct TargetSpec {
    std::string kind = "zero";            // zero | uncontrolled_run | file
    std::string file;
};

struct OutputSpec {
    std::string dir = "out";
    std::size_t max_paths = 100;
};

struct ExperimentConfig {
    OperatorSpec op;
    NoiseSpec noise;
    ExponentParams exponents;
    double T = 1.0;
    std::size_t N = 128;
    std::size_t paths = 2000;
    std::uint64_t seed = 42;
    double m_level = 10.0;
    double xi_norm = 2.0;
    ControlSpec control;
    AdmissibleSpec admissible;
    TargetSpec target;
    RegressionBasis basis = RegressionBasis::affine;
    std::size_t picard_max = 50;
    double picard_tol = 1e-20;
    double ridge = 1e-8;
    std::size_t opt_max_iter = 100;
    double opt_tol = 1e-8;
    double rho = 0.5;
    bool backtracking = true;
    std::vector<double> thetas{1e-2, 1e-3, 1e-4, 1e-5};
    std::vector<double> lambdas{10.0, 100.0, 1000.0, 10000.0};
    OutputSpec output;
    /// Directory of the config file, used to resolve relative paths.
    std::filesystem::path base_dir;

    /// Parses INI text; unknown keys are rejected.
    static ExperimentConfig from_string(const std::string& text, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& file);

    /// Validates the configuration as a whole; errors name the offending field.
    void validate() const;
    /// Normalized INI text (sorted sections and keys, output.dir omitted); hashed into the manifest.
    [[nodiscard]] std::string canonical_text() const;

    [[nodiscard]] TimeGrid grid() const { return TimeGrid(T, N); }
    [[nodiscard]] Problem build_problem() const;
    [[nodiscard]] AdmissibleSet build_admissible() const;
    [[nodiscard]] ControlPath initial_control() const;
    [[nodiscard]] ControlPath direction() const;
    [[nodiscard]] OptimizeOptions optimize_options() const;
    /// Backward config with y_d resolved (may run the uncontrolled forward ensemble).
    [[nodiscard]] BackwardConfig build_backward(const Problem& problem, const std::vector<WienerPath>& paths) const;
};

/// Parses "1, 2.5, 3" into numbers; throws ValidationError naming `field`.
[[nodiscard]] std::vector<double> parse_list(const std::string& text, const std::string& field);

}  // namespace gsmp::harness

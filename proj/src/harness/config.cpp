#include "gsmp/harness/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <random>
#include <sstream>

#include "gsmp/errors.hpp"
#include "gsmp/fourier2d.hpp"

namespace gsmp::harness {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"operator", {"instantiation", "K", "eigenvalues", "tensor_seed", "tensor_scale", "tensor_skew",
                      "m_tilde_samples", "corrupt_adjoint"}},
        {"noise", {"kind", "J", "mu", "sigma", "additive_scale"}},
        {"exponents", {"alpha", "beta", "gamma", "delta", "dim_n"}},
        {"grid", {"T", "N"}},
        {"ensemble", {"paths", "seed"}},
        {"forward", {"m_level", "xi_norm"}},
        {"control", {"map", "map_scale", "initial", "initial_value", "direction", "direction_seed"}},
        {"admissible", {"variant", "radius", "lo", "hi"}},
        {"target", {"y_d", "file"}},
        {"backward", {"basis", "picard_max", "picard_tol", "ridge", "lambdas"}},
        {"optimize", {"max_iter", "tol", "rho", "backtracking", "thetas"}},
        {"output", {"dir", "max_paths"}},
    };
    return keys;
}

template <class T>
T read(const pt::ptree& tree, const std::string& path, T fallback) {
    const auto node = tree.get_optional<std::string>(path);
    if (!node) return fallback;
    std::string s = *node;
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    if constexpr (std::is_same_v<T, std::string>) {
        return s;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ValidationError(path + ": expected a boolean, got '" + s + "'");
    } else {
        T value{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ValidationError(path + ": cannot parse '" + s + "'");
        return value;
    }
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

}  // namespace

std::vector<double> parse_list(const std::string& text, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
            throw ValidationError(field + ": cannot parse list entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    const auto& keys = known_keys();
    for (const auto& [section, node] : tree) {
        const auto it = keys.find(section);
        if (it == keys.end()) throw ValidationError("config: unknown section [" + section + "]");
        if (node.empty() && !node.data().empty()) throw ValidationError("config: key '" + section + "' outside a section");
        for (const auto& [key, _] : node)
            if (!it->second.count(key)) throw ValidationError("config: unknown key " + section + "." + key);
    }

    ExperimentConfig c;
    c.base_dir = base_dir;
    c.op.instantiation = tensor_kind_from_string(read<std::string>(tree, "operator.instantiation", "fourier2d"));
    c.op.K = read<std::size_t>(tree, "operator.K", c.op.K);
    if (auto ev = tree.get_optional<std::string>("operator.eigenvalues")) c.op.eigenvalues = parse_list(*ev, "operator.eigenvalues");
    c.op.tensor_seed = read<std::uint64_t>(tree, "operator.tensor_seed", c.op.tensor_seed);
    c.op.tensor_scale = read<double>(tree, "operator.tensor_scale", c.op.tensor_scale);
    c.op.tensor_skew = read<bool>(tree, "operator.tensor_skew", c.op.tensor_skew);
    c.op.m_tilde_samples = read<std::size_t>(tree, "operator.m_tilde_samples", c.op.m_tilde_samples);
    c.op.corrupt_adjoint = read<bool>(tree, "operator.corrupt_adjoint", c.op.corrupt_adjoint);

    c.noise.kind = read<std::string>(tree, "noise.kind", c.noise.kind);
    c.noise.J = read<std::size_t>(tree, "noise.J", c.noise.J);
    if (auto mu = tree.get_optional<std::string>("noise.mu")) c.noise.mu = parse_list(*mu, "noise.mu");
    c.noise.sigma = read<double>(tree, "noise.sigma", c.noise.sigma);
    c.noise.additive_scale = read<double>(tree, "noise.additive_scale", c.noise.additive_scale);

    c.exponents.alpha = read<double>(tree, "exponents.alpha", c.exponents.alpha);
    c.exponents.beta = read<double>(tree, "exponents.beta", c.exponents.beta);
    c.exponents.gamma = read<double>(tree, "exponents.gamma", c.exponents.gamma);
    c.exponents.delta = read<double>(tree, "exponents.delta", c.exponents.delta);
    c.exponents.dim_n = read<int>(tree, "exponents.dim_n", c.exponents.dim_n);

    c.T = read<double>(tree, "grid.T", c.T);
    c.N = read<std::size_t>(tree, "grid.N", c.N);
    c.paths = read<std::size_t>(tree, "ensemble.paths", c.paths);
    c.seed = read<std::uint64_t>(tree, "ensemble.seed", c.seed);
    c.m_level = read<double>(tree, "forward.m_level", c.m_level);
    c.xi_norm = read<double>(tree, "forward.xi_norm", c.xi_norm);

    c.control.map = read<std::string>(tree, "control.map", c.control.map);
    c.control.map_scale = read<double>(tree, "control.map_scale", c.control.map_scale);
    c.control.initial = read<std::string>(tree, "control.initial", c.control.initial);
    c.control.initial_value = read<double>(tree, "control.initial_value", c.control.initial_value);
    c.control.direction = read<std::string>(tree, "control.direction", c.control.direction);
    c.control.direction_seed = read<std::uint64_t>(tree, "control.direction_seed", c.control.direction_seed);

    c.admissible.variant = read<std::string>(tree, "admissible.variant", c.admissible.variant);
    c.admissible.radius = read<double>(tree, "admissible.radius", c.admissible.radius);
    c.admissible.lo = read<double>(tree, "admissible.lo", c.admissible.lo);
    c.admissible.hi = read<double>(tree, "admissible.hi", c.admissible.hi);

    c.target.kind = read<std::string>(tree, "target.y_d", c.target.kind);
    c.target.file = read<std::string>(tree, "target.file", c.target.file);

    c.basis = regression_basis_from_string(read<std::string>(tree, "backward.basis", "affine"));
    c.picard_max = read<std::size_t>(tree, "backward.picard_max", c.picard_max);
    c.picard_tol = read<double>(tree, "backward.picard_tol", c.picard_tol);
    c.ridge = read<double>(tree, "backward.ridge", c.ridge);
    if (auto l = tree.get_optional<std::string>("backward.lambdas")) c.lambdas = parse_list(*l, "backward.lambdas");

    c.opt_max_iter = read<std::size_t>(tree, "optimize.max_iter", c.opt_max_iter);
    c.opt_tol = read<double>(tree, "optimize.tol", c.opt_tol);
    c.rho = read<double>(tree, "optimize.rho", c.rho);
    c.backtracking = read<bool>(tree, "optimize.backtracking", c.backtracking);
    if (auto t = tree.get_optional<std::string>("optimize.thetas")) c.thetas = parse_list(*t, "optimize.thetas");

    c.output.dir = read<std::string>(tree, "output.dir", c.output.dir);
    c.output.max_paths = read<std::size_t>(tree, "output.max_paths", c.output.max_paths);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("config: cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), file.parent_path());
}

void ExperimentConfig::validate() const {
    if (op.K == 0) throw ValidationError("operator.K must be positive");
    if (!op.eigenvalues.empty() && op.eigenvalues.size() != op.K)
        throw ValidationError("operator.eigenvalues must list K values");
    if (op.instantiation == TensorKind::fourier2d && !op.eigenvalues.empty())
        throw ValidationError("operator.eigenvalues only applies to the synthetic instantiation");
    if (!(op.tensor_scale >= 0.0)) throw ValidationError("operator.tensor_scale must be nonnegative");
    if (noise.kind != "multiplicative" && noise.kind != "additive" && noise.kind != "none")
        throw ValidationError("noise.kind must be multiplicative, additive or none");
    if (noise.J == 0) throw ValidationError("noise.J must be positive");
    if (!noise.mu.empty() && noise.mu.size() != noise.J) throw ValidationError("noise.mu must list J values");
    for (double m : noise.mu)
        if (!(m >= 0.0)) throw ValidationError("noise.mu entries must be nonnegative");
    try {
        ExponentParams p = exponents;
        p.backward_mode = true;
        p.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("exponents: ") + e.what());
    }
    if (!(T > 0.0)) throw ValidationError("grid.T must be positive");
    if (N == 0) throw ValidationError("grid.N must be positive");
    if (paths == 0) throw ValidationError("ensemble.paths must be positive");
    if (!(m_level > 0.0)) throw ValidationError("forward.m_level must be positive");
    if (!(xi_norm >= 0.0)) throw ValidationError("forward.xi_norm must be nonnegative");
    if (control.map != "identity" && control.map != "scaled") throw ValidationError("control.map must be identity or scaled");
    if (control.initial != "zero" && control.initial != "constant") throw ValidationError("control.initial must be zero or constant");
    if (control.direction != "smooth" && control.direction != "random" && control.direction != "constant")
        throw ValidationError("control.direction must be smooth, random or constant");
    if (admissible.variant != "norm_ball" && admissible.variant != "pointwise_ball" && admissible.variant != "box")
        throw ValidationError("admissible.variant must be norm_ball, pointwise_ball or box");
    if (!(admissible.radius > 0.0)) throw ValidationError("admissible.radius must be positive");
    if (admissible.lo > 0.0 || admissible.hi < 0.0) throw ValidationError("admissible.lo/hi must bracket 0");
    if (target.kind != "zero" && target.kind != "uncontrolled_run" && target.kind != "file")
        throw ValidationError("target.y_d must be zero, uncontrolled_run or file");
    if (target.kind == "file" && target.file.empty()) throw ValidationError("target.file is required when target.y_d = file");
    if (picard_max == 0) throw ValidationError("backward.picard_max must be positive");
    if (!(ridge >= 0.0)) throw ValidationError("backward.ridge must be nonnegative");
    if (!(rho > 0.0 && rho <= 1.0)) throw ValidationError("optimize.rho must lie in (0, 1]");
    if (opt_max_iter == 0) throw ValidationError("optimize.max_iter must be positive");
    for (double t : thetas)
        if (t == 0.0) throw ValidationError("optimize.thetas entries must be nonzero");
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        if (!(lambdas[i] > 0.0) || (i > 0 && !(lambdas[i] > lambdas[i - 1])))
            throw ValidationError("backward.lambdas must be positive and increasing");
}

std::string ExperimentConfig::canonical_text() const {
    std::map<std::string, std::string> kv{
        {"operator.instantiation", to_string(op.instantiation)},
        {"operator.K", std::to_string(op.K)},
        {"operator.eigenvalues", fmt_list(op.eigenvalues)},
        {"operator.tensor_seed", std::to_string(op.tensor_seed)},
        {"operator.tensor_scale", fmt(op.tensor_scale)},
        {"operator.tensor_skew", op.tensor_skew ? "true" : "false"},
        {"operator.m_tilde_samples", std::to_string(op.m_tilde_samples)},
        {"operator.corrupt_adjoint", op.corrupt_adjoint ? "true" : "false"},
        {"noise.kind", noise.kind},
        {"noise.J", std::to_string(noise.J)},
        {"noise.mu", fmt_list(noise.mu)},
        {"noise.sigma", fmt(noise.sigma)},
        {"noise.additive_scale", fmt(noise.additive_scale)},
        {"exponents.alpha", fmt(exponents.alpha)},
        {"exponents.beta", fmt(exponents.beta)},
        {"exponents.gamma", fmt(exponents.gamma)},
        {"exponents.delta", fmt(exponents.delta)},
        {"exponents.dim_n", std::to_string(exponents.dim_n)},
        {"grid.T", fmt(T)},
        {"grid.N", std::to_string(N)},
        {"ensemble.paths", std::to_string(paths)},
        {"ensemble.seed", std::to_string(seed)},
        {"forward.m_level", fmt(m_level)},
        {"forward.xi_norm", fmt(xi_norm)},
        {"control.map", control.map},
        {"control.map_scale", fmt(control.map_scale)},
        {"control.initial", control.initial},
        {"control.initial_value", fmt(control.initial_value)},
        {"control.direction", control.direction},
        {"control.direction_seed", std::to_string(control.direction_seed)},
        {"admissible.variant", admissible.variant},
        {"admissible.radius", fmt(admissible.radius)},
        {"admissible.lo", fmt(admissible.lo)},
        {"admissible.hi", fmt(admissible.hi)},
        {"target.y_d", target.kind},
        {"target.file", target.file.empty() || std::filesystem::path(target.file).is_absolute()
                            ? target.file
                            : std::filesystem::absolute(base_dir / target.file).lexically_normal().string()},
        {"backward.basis", to_string(basis)},
        {"backward.picard_max", std::to_string(picard_max)},
        {"backward.picard_tol", fmt(picard_tol)},
        {"backward.ridge", fmt(ridge)},
        {"backward.lambdas", fmt_list(lambdas)},
        {"optimize.max_iter", std::to_string(opt_max_iter)},
        {"optimize.tol", fmt(opt_tol)},
        {"optimize.rho", fmt(rho)},
        {"optimize.backtracking", backtracking ? "true" : "false"},
        {"optimize.thetas", fmt_list(thetas)},
        {"output.max_paths", std::to_string(output.max_paths)},
    };
    // INI layout so the text can be parsed back by from_string
    std::string out, section;
    for (const auto& [k, v] : kv) {
        const auto dot = k.find('.');
        const std::string sec = k.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += k.substr(dot + 1) + " = " + v + "\n";
    }
    return out;
}

Problem ExperimentConfig::build_problem() const {
    validate();
    const auto make_op = [&]() -> SpectralOperator {
        if (op.instantiation == TensorKind::fourier2d) return fourier2d::stokes_operator(op.K);
        if (!op.eigenvalues.empty()) return SpectralOperator(op.eigenvalues);
        return SpectralOperator::synthetic(op.K);
    };
    SpectralOperator A = make_op();
    BilinearTensor tensor = op.instantiation == TensorKind::fourier2d
                                ? BilinearTensor::fourier2d(A)
                                : BilinearTensor::synthetic(op.K, op.tensor_seed, op.tensor_scale, op.tensor_skew);
    if (op.m_tilde_samples > 0) tensor.estimate_m_tilde(A, exponents, op.m_tilde_samples, op.tensor_seed);
    if (op.corrupt_adjoint) tensor.corrupt_adjoint_cache(1e-3, op.tensor_seed + 1);

    std::vector<double> mu = noise.mu;
    if (mu.empty()) {
        mu.resize(noise.J);
        for (std::size_t j = 0; j < noise.J; ++j) mu[j] = std::ldexp(1.0, -static_cast<int>(j + 1));
    }
    const auto Ki = static_cast<Eigen::Index>(op.K);
    const auto Ji = static_cast<Eigen::Index>(noise.J);
    NoiseModel nm = [&]() {
        if (noise.kind == "none") return NoiseModel::none(op.K, exponents.alpha);
        if (noise.kind == "additive") {
            Matrix g = Matrix::Zero(Ki, Ji);
            for (Eigen::Index j = 0; j < std::min(Ki, Ji); ++j) g(j, j) = noise.additive_scale;
            return NoiseModel::additive(std::move(g), mu, exponents.alpha);
        }
        return NoiseModel::diagonal_multiplicative(op.K, mu, noise.sigma, exponents.alpha);
    }();
    nm.estimate_c_g(A);

    ForwardConfig fc;
    fc.params = exponents;
    fc.m_level = m_level;
    fc.grid = grid();
    fc.xi = xi_norm > 0.0 ? default_initial_state(A, exponents.alpha, xi_norm) : Vector::Zero(Ki);
    fc.control_map = (control.map == "identity" ? 1.0 : control.map_scale) * Matrix::Identity(Ki, Ki);
    Problem p{std::move(A), std::move(tensor), std::move(nm), std::move(fc)};
    p.validate();
    return p;
}

AdmissibleSet ExperimentConfig::build_admissible() const {
    if (admissible.variant == "norm_ball") return AdmissibleSet::norm_ball(admissible.radius, exponents.beta);
    if (admissible.variant == "pointwise_ball") return AdmissibleSet::pointwise_ball(admissible.radius, exponents.beta);
    const auto Ki = static_cast<Eigen::Index>(op.K);
    return AdmissibleSet::box(Vector::Constant(Ki, admissible.lo), Vector::Constant(Ki, admissible.hi), exponents.beta);
}

ControlPath ExperimentConfig::initial_control() const {
    const auto Ni = static_cast<Eigen::Index>(N);
    const auto Ki = static_cast<Eigen::Index>(op.K);
    if (control.initial == "constant") return ControlPath::deterministic(Matrix::Constant(Ni, Ki, control.initial_value));
    return ControlPath::zero(N, op.K);
}

ControlPath ExperimentConfig::direction() const {
    const auto Ni = static_cast<Eigen::Index>(N);
    const auto Ki = static_cast<Eigen::Index>(op.K);
    Matrix v(Ni, Ki);
    if (control.direction == "constant") {
        v.setOnes();
    } else if (control.direction == "random") {
        std::mt19937_64 rng(control.direction_seed);
        std::normal_distribution<double> normal;
        for (Eigen::Index i = 0; i < Ni; ++i)
            for (Eigen::Index k = 0; k < Ki; ++k) v(i, k) = normal(rng);
    } else {
        const double dt = T / static_cast<double>(N);
        for (Eigen::Index i = 0; i < Ni; ++i)
            for (Eigen::Index k = 0; k < Ki; ++k)
                v(i, k) = std::sin(2.0 * 3.141592653589793 * static_cast<double>(i) * dt / T + static_cast<double>(k)) /
                          static_cast<double>(k + 1);
    }
    return ControlPath::deterministic(std::move(v));
}

OptimizeOptions ExperimentConfig::optimize_options() const {
    OptimizeOptions o;
    o.max_iter = opt_max_iter;
    o.tol = opt_tol;
    o.step_rule.rho = rho;
    o.step_rule.backtracking = backtracking;
    return o;
}

BackwardConfig ExperimentConfig::build_backward(const Problem& problem, const std::vector<WienerPath>& paths) const {
    BackwardConfig bc;
    bc.params = exponents;
    bc.params.backward_mode = true;
    bc.grid = grid();
    bc.basis = basis;
    bc.picard_max = picard_max;
    bc.picard_tol = picard_tol;
    bc.ridge = ridge;
    const auto Ni = static_cast<Eigen::Index>(N);
    const auto Ki = static_cast<Eigen::Index>(op.K);
    bc.y_d = Matrix::Zero(Ni, Ki);
    if (target.kind == "uncontrolled_run") {
        const auto ens = run_forward(problem, paths, ControlPath::zero(N, op.K));
        for (const auto& s : ens.states) bc.y_d += s.leftCols(Ni).transpose();
        bc.y_d /= static_cast<double>(ens.paths());
    } else if (target.kind == "file") {
        const std::filesystem::path f = std::filesystem::path(target.file).is_absolute()
                                            ? std::filesystem::path(target.file)
                                            : base_dir / target.file;
        std::ifstream in(f);
        if (!in) throw ValidationError("target.file: cannot open " + f.string());
        std::string line;
        std::getline(in, line);  // header
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            const auto v = parse_list(line, "target.file line " + std::to_string(row));
            if (v.size() != 3) throw ValidationError("target.file line " + std::to_string(row) + ": expected step,mode,value");
            const auto i = static_cast<Eigen::Index>(v[0]);
            const auto k = static_cast<Eigen::Index>(v[1]);
            if (i < 0 || i >= Ni || k < 0 || k >= Ki)
                throw ValidationError("target.file line " + std::to_string(row) + ": index out of range");
            bc.y_d(i, k) = v[2];
        }
    }
    return bc;
}

}  // namespace gsmp::harness

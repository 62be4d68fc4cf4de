#include "gsmp/harness/experiment.hpp"

#include <chrono>
#include <ctime>
#include <iostream>

#include "gsmp/errors.hpp"
#include "gsmp/harness/invariants.hpp"
#include "gsmp/harness/io.hpp"
#include "json.hpp"

namespace gsmp::harness {

namespace fs = std::filesystem;

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::write(const fs::path& dir) const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["config_hash"] = config_hash;
    j["master_seed"] = master_seed;
    j["paths"] = paths;
    j["seed_derivation"] = seed_derivation;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    j["config"] = config_text;
    auto& arr = j["files"] = nlohmann::json::array();
    for (const auto& f : files) {
        const std::string bytes = read_file(f);
        arr.push_back({{"name", f.filename().string()}, {"bytes", bytes.size()}, {"fnv1a", hex64(fnv1a(bytes))}});
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(1) << '\n';
}

RunManifest RunManifest::load(const fs::path& file) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest: " + std::string(e.what()));
    } catch (const std::runtime_error& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config_text = j.at("config").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.paths = j.at("paths").get<std::size_t>();
        m.version = j.at("version").get<std::string>();
        m.started_utc = j.value("started_utc", "");
        m.finished_utc = j.value("finished_utc", "");
        for (const auto& f : j.at("files")) m.files.emplace_back(f.at("name").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest: missing field (" + std::string(e.what()) + ")");
    }
    if (hex64(fnv1a(m.config_text)) != m.config_hash) throw ValidationError("manifest: config hash does not match config text");
    return m;
}

namespace {

struct Session {
    RunManifest manifest;
    fs::path out;

    Session(const std::string& command, const ExperimentConfig& config, const fs::path& dir) : out(dir) {
        fs::create_directories(out);
        manifest.command = command;
        manifest.config_text = config.canonical_text();
        manifest.config_hash = hex64(fnv1a(manifest.config_text));
        manifest.master_seed = config.seed;
        manifest.paths = config.paths;
        manifest.started_utc = utc_now();
    }
    void add(const fs::path& f) { manifest.files.push_back(f); }
    void add(const std::vector<fs::path>& fs_) {
        for (const auto& f : fs_) add(f);
    }
    void finish() {
        manifest.finished_utc = utc_now();
        manifest.write(out);
    }
};

}  // namespace

int cmd_simulate(const ExperimentConfig& config, const fs::path& out) {
    Session s("simulate", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto u = config.initial_control();
    const auto fwd = run_forward(problem, paths, u);
    s.add(write_forward(out, fwd, config.output.max_paths));
    const auto bc = config.build_backward(problem, paths);
    const auto cost = evaluate_cost(problem, fwd, u, bc.y_d);
    CsvWriter w(out / "cost.csv", {"J[cost]", "tracking[cost]", "energy[cost]", "tau_hit_fraction[probability]", "std_error[cost]"});
    w.row(cost.J, cost.tracking_term, cost.energy_term, cost.tau_hit_fraction, cost.std_error);
    w.close();
    s.add(w.file());
    s.finish();
    return exit_ok;
}

int cmd_linearize(const ExperimentConfig& config, const fs::path& out) {
    Session s("linearize", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto fwd = run_forward(problem, paths, config.initial_control());
    const auto z = run_linearized(problem, fwd, config.direction());
    s.add(write_forward(out, fwd, config.output.max_paths));
    s.add(write_linearized(out, problem.grid(), z, config.output.max_paths));
    s.finish();
    return exit_ok;
}

int cmd_adjoint(const ExperimentConfig& config, const fs::path& out) {
    Session s("adjoint", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto fwd = run_forward(problem, paths, config.initial_control());
    const auto bc = config.build_backward(problem, paths);
    const auto bwd = solve_backward(bc, fwd, problem);
    s.add(write_backward(out, fwd, bwd, config.output.max_paths));
    s.finish();
    return bwd.converged ? exit_ok : exit_solver;
}

int cmd_duality_check(const ExperimentConfig& config, const fs::path& out) {
    Session s("duality-check", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto u = config.initial_control();
    const auto v = config.direction();
    const auto fwd = run_forward(problem, paths, u);
    const auto z = run_linearized(problem, fwd, v);
    const auto bc = config.build_backward(problem, paths);
    const auto bwd = solve_backward(bc, fwd, problem);
    const auto d = duality_residual(problem, fwd, z, bwd, v, bc.y_d);
    CsvWriter w(out / "duality.csv", {"lhs", "rhs", "residual", "std_error", "residual_over_se", "picard_iterations"});
    w.row(d.lhs, d.rhs, d.residual, d.std_error, d.std_error > 0.0 ? d.residual / d.std_error : 0.0,
          bwd.picard_iterations_used);
    w.close();
    s.add(w.file());
    s.finish();
    return bwd.converged ? exit_ok : exit_solver;
}

int cmd_grad_check(const ExperimentConfig& config, const fs::path& out) {
    Session s("grad-check", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto u = config.initial_control();
    const auto v = config.direction();
    const auto bc = config.build_backward(problem, paths);
    const auto fwd = run_forward(problem, paths, u);
    const auto z = run_linearized(problem, fwd, v);
    const auto base = evaluate_cost(problem, fwd, u, bc.y_d);
    const auto dj = gateaux_cost_derivative(problem, fwd, z, u, v, bc.y_d);
    const auto state = gateaux_check(problem, paths, u, v, config.thetas);
    CsvWriter w(out / "grad_check.csv", {"theta", "difference_quotient", "quotient_se", "derivative", "derivative_se",
                                         "abs_error", "rel_error", "state_mse", "state_rms", "tau_change_fraction"});
    for (std::size_t t = 0; t < config.thetas.size(); ++t) {
        const double th = config.thetas[t];
        const auto shifted = ControlPath::combine(1.0, u, th, v);
        const auto fp = run_forward(problem, paths, shifted);
        const auto c = evaluate_cost(problem, fp, shifted, bc.y_d);
        std::vector<double> q(paths.size());
        double mean = 0.0;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            q[p] = (c.per_path[p] - base.per_path[p]) / th;
            mean += q[p];
        }
        mean /= static_cast<double>(q.size());
        double ss = 0.0;
        for (double x : q) ss += (x - mean) * (x - mean);
        const double n = static_cast<double>(q.size());
        const double se = q.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
        const double err = std::abs(mean - dj.value);
        w.row(th, mean, se, dj.value, dj.std_error, err, dj.value != 0.0 ? err / std::abs(dj.value) : err,
              state[t].mean_sq_error, state[t].rms_error, state[t].tau_change_fraction);
    }
    w.close();
    s.add(w.file());
    s.finish();
    return exit_ok;
}

int cmd_optimize(const ExperimentConfig& config, const fs::path& out) {
    Session s("optimize", config, out);
    const Problem problem = config.build_problem();
    const auto paths = sample_paths(problem, config.paths, config.seed);
    const auto bc = config.build_backward(problem, paths);
    const auto res = optimize(problem, bc, config.build_admissible(), paths, config.initial_control(),
                              config.optimize_options());
    s.add(write_history(out, res.history));
    s.add(write_control(out, "control.csv", problem.grid(), res.u_opt, config.output.max_paths));
    CsvWriter w(out / "optimize_summary.csv", {"converged", "iterations", "fixed_point_residual[norm]",
                                               "u_opt_norm[norm]", "J_final[cost]"});
    const double un = res.u_opt.norm(problem.op, problem.params().beta, problem.grid().dt(), paths.size());
    w.row(res.converged, res.history.size(), res.fixed_point_residual, un, res.history.back().J);
    w.close();
    s.add(w.file());
    s.finish();
    return res.converged ? exit_ok : exit_solver;
}

int cmd_invariants(const ExperimentConfig& config, const fs::path& out, const std::string& suite) {
    Session s("invariants", config, out);
    const auto rows = run_invariants(config, suite);
    CsvWriter w(out / "invariants.csv", {"suite", "name", "anchor", "value", "threshold", "passed"});
    bool ok = true;
    for (const auto& r : rows) {
        w.row(r.suite, r.name, "\"" + r.anchor + "\"", r.value, r.threshold, r.passed);
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << "/" << r.name << "  value=" << format_double(r.value)
                  << " threshold=" << format_double(r.threshold) << "  [" << r.anchor << "]\n";
        ok = ok && r.passed;
    }
    w.close();
    s.add(w.file());
    s.finish();
    return ok ? exit_ok : exit_acceptance;
}

int cmd_export(const ExperimentConfig& config, const fs::path& out) {
    Session s("export", config, out);
    const Problem problem = config.build_problem();
    s.add(export_operator(out, problem.op, problem.tensor));
    CsvWriter w(out / "operator.csv", {"mode", "eigenvalue[1/time]", "k1", "k2", "cosine"});
    for (std::size_t k = 0; k < problem.op.dim(); ++k) {
        const auto& meta = problem.op.mode_meta();
        w.row(k, problem.op.eigenvalues()[k], meta ? (*meta)[k].k1 : 0, meta ? (*meta)[k].k2 : 0,
              meta ? (*meta)[k].cosine : true);
    }
    w.close();
    s.add(w.file());
    s.finish();
    return exit_ok;
}

int run_command(const std::string& command, const ExperimentConfig& config, const fs::path& out,
                const std::string& suite) {
    try {
        if (command == "simulate") return cmd_simulate(config, out);
        if (command == "linearize") return cmd_linearize(config, out);
        if (command == "adjoint") return cmd_adjoint(config, out);
        if (command == "duality-check") return cmd_duality_check(config, out);
        if (command == "grad-check") return cmd_grad_check(config, out);
        if (command == "optimize") return cmd_optimize(config, out);
        if (command == "invariants") return cmd_invariants(config, out, suite);
        if (command == "export") return cmd_export(config, out);
        std::cerr << "unknown command '" << command << "'\n";
        return exit_validation;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return exit_validation;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return exit_solver;
    }
}

}  // namespace gsmp::harness

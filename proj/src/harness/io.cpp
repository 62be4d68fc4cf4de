#include "gsmp/harness/io.hpp"

#include <cstdio>
#include "json.hpp"
#include <sstream>

#include "gsmp/errors.hpp"

namespace gsmp::harness {

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header)
    : file_(file), out_(file, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + file.string() + " for writing");
    std::string line;
    for (std::size_t i = 0; i < header.size(); ++i) line += (i ? "," : "") + header[i];
    out_ << line << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + file_.string());
}

std::vector<std::filesystem::path> write_forward(const std::filesystem::path& dir, const ForwardEnsemble& forward,
                                                 std::size_t max_paths) {
    std::filesystem::create_directories(dir);
    CsvWriter traj(dir / "trajectory.csv", {"path", "step", "t[time]", "mode", "value[coefficient]"});
    const std::size_t P = std::min(max_paths, forward.paths());
    for (std::size_t p = 0; p < P; ++p) {
        const Matrix& s = forward.states[p];
        for (Eigen::Index i = 0; i < s.cols(); ++i)
            for (Eigen::Index k = 0; k < s.rows(); ++k)
                traj.row(p, static_cast<std::size_t>(i), forward.grid.t(static_cast<std::size_t>(i)),
                         static_cast<std::size_t>(k), s(k, i));
    }
    traj.close();
    CsvWriter tau(dir / "tau.csv", {"path", "tau_index[step]", "tau[time]", "stopped"});
    for (std::size_t p = 0; p < forward.paths(); ++p)
        tau.row(p, forward.tau_index[p], forward.grid.t(forward.tau_index[p]), forward.tau_index[p] < forward.grid.N);
    tau.close();
    return {traj.file(), tau.file()};
}

std::filesystem::path write_linearized(const std::filesystem::path& dir, const TimeGrid& grid,
                                       const std::vector<Matrix>& z, std::size_t max_paths) {
    std::filesystem::create_directories(dir);
    CsvWriter w(dir / "linearized.csv", {"path", "step", "t[time]", "mode", "value[coefficient]"});
    for (std::size_t p = 0; p < std::min(max_paths, z.size()); ++p)
        for (Eigen::Index i = 0; i < z[p].cols(); ++i)
            for (Eigen::Index k = 0; k < z[p].rows(); ++k)
                w.row(p, static_cast<std::size_t>(i), grid.t(static_cast<std::size_t>(i)), static_cast<std::size_t>(k),
                      z[p](k, i));
    w.close();
    return w.file();
}

std::vector<std::filesystem::path> write_backward(const std::filesystem::path& dir, const ForwardEnsemble& forward,
                                                  const BackwardSolution& backward, std::size_t max_paths) {
    std::filesystem::create_directories(dir);
    CsvWriter reg(dir / "regression.csv", {"step", "basis_index", "feature", "mode", "value"});
    for (std::size_t i = 0; i < backward.regression_coeffs.size(); ++i) {
        const auto& fit = backward.regression_coeffs[i];
        if (fit.empty) continue;
        for (Eigen::Index b = 0; b < fit.coef.rows(); ++b) {
            // basis 0 is the intercept; others are standardized raw features
            const long feature = b == 0 ? -1 : static_cast<long>(fit.kept[static_cast<std::size_t>(b - 1)]);
            for (Eigen::Index c = 0; c < fit.coef.cols(); ++c)
                reg.row(i, static_cast<std::size_t>(b), feature, static_cast<std::size_t>(c), fit.coef(b, c));
        }
    }
    reg.close();
    CsvWriter zs(dir / "zstar.csv", {"path", "step", "t[time]", "mode", "value[coefficient]"});
    CsvWriter ph(dir / "phi.csv", {"path", "step", "t[time]", "mode", "noise_mode", "value[coefficient]"});
    const std::size_t P = std::min(max_paths, backward.paths());
    for (std::size_t p = 0; p < P; ++p) {
        const Matrix& z = backward.z_star[p];
        for (Eigen::Index i = 0; i < z.cols(); ++i) {
            const auto step = static_cast<std::size_t>(i);
            for (Eigen::Index k = 0; k < z.rows(); ++k)
                zs.row(p, step, backward.grid.t(step), static_cast<std::size_t>(k), z(k, i));
            if (step == backward.grid.N) continue;
            const HSOperator phi = backward.phi(forward, p, step);
            for (Eigen::Index j = 0; j < phi.cols(); ++j)
                for (Eigen::Index k = 0; k < phi.rows(); ++k)
                    ph.row(p, step, backward.grid.t(step), static_cast<std::size_t>(k), static_cast<std::size_t>(j),
                           phi(k, j));
        }
    }
    zs.close();
    ph.close();
    CsvWriter pic(dir / "picard.csv", {"iteration", "residual[squared_norm]"});
    for (std::size_t k = 0; k < backward.residual_history.size(); ++k) pic.row(k + 1, backward.residual_history[k]);
    pic.close();
    return {reg.file(), zs.file(), ph.file(), pic.file()};
}

std::filesystem::path write_history(const std::filesystem::path& dir, const std::vector<HistoryRow>& history) {
    std::filesystem::create_directories(dir);
    CsvWriter w(dir / "history.csv", {"iteration", "J[cost]", "tracking[cost]", "energy[cost]",
                                      "fixed_point_residual[norm]", "tau_hit_fraction[probability]", "rho", "J_std_error[cost]"});
    for (const auto& h : history)
        w.row(h.iteration, h.J, h.tracking, h.energy, h.fixed_point_residual, h.tau_hit_fraction, h.rho,
              h.cost_std_error);
    w.close();
    return w.file();
}

std::filesystem::path write_control(const std::filesystem::path& dir, const std::string& name, const TimeGrid& grid,
                                    const ControlPath& u, std::size_t max_paths) {
    std::filesystem::create_directories(dir);
    CsvWriter w(dir / name, {"path", "step", "t[time]", "mode", "value[coefficient]"});
    const std::size_t P = u.is_per_path() ? std::min(max_paths, u.path_count()) : 1;
    for (std::size_t p = 0; p < P; ++p) {
        const Matrix& m = u.for_path(p);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index k = 0; k < m.cols(); ++k)
                w.row(u.is_per_path() ? static_cast<long>(p) : -1L, static_cast<std::size_t>(i),
                      grid.t(static_cast<std::size_t>(i)), static_cast<std::size_t>(k), m(i, k));
    }
    w.close();
    return w.file();
}

std::filesystem::path export_operator(const std::filesystem::path& dir, const SpectralOperator& op,
                                      const BilinearTensor& tensor) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j;
    j["format"] = "gsmp-operator";
    j["K"] = op.dim();
    j["eigenvalues"] = op.eigenvalues();
    if (op.mode_meta()) {
        auto& modes = j["modes"] = nlohmann::json::array();
        for (const auto& m : *op.mode_meta()) modes.push_back({{"k1", m.k1}, {"k2", m.k2}, {"cosine", m.cosine}});
    }
    j["tensor"]["instantiation"] = to_string(tensor.kind());
    j["tensor"]["m_tilde"] = tensor.m_tilde();
    j["tensor"]["m_tilde_alpha"] = tensor.m_tilde_alpha();
    j["tensor"]["m_tilde_delta"] = tensor.m_tilde_delta();
    auto& coo = j["tensor"]["entries"] = nlohmann::json::array();
    const std::size_t K = tensor.dim();
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b)
            for (std::size_t c = 0; c < K; ++c) {
                const double v = tensor.entry(a, b, c);
                if (v != 0.0) coo.push_back({a, b, c, v});
            }
    const auto file = dir / "operator.json";
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + file.string());
    out << j.dump(1) << '\n';
    return file;
}

std::uint64_t fnv1a(const std::string& bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace gsmp::harness

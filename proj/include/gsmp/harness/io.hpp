#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "gsmp/backward.hpp"
#include "gsmp/control.hpp"
#include "gsmp/forward.hpp"

namespace gsmp::harness {

/// Shortest round-trip text for a double; identical bits give identical text.
[[nodiscard]] std::string format_double(double v);

/// Comma-separated file with a header row. Numbers go through std::to_chars
/// so output does not depend on locale or stream state.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header);

    template <class... Ts>
    void row(const Ts&... cells) {
        std::string line;
        bool first = true;
        (append(line, cells, first), ...);
        line += '\n';
        out_ << line;
    }
    void close();
    [[nodiscard]] const std::filesystem::path& file() const noexcept { return file_; }

private:
    template <class T>
    static void append(std::string& line, const T& cell, bool& first) {
        if (!first) line += ',';
        first = false;
        if constexpr (std::is_same_v<T, std::string> || std::is_convertible_v<T, const char*>) {
            line += cell;
        } else if constexpr (std::is_same_v<T, bool>) {
            line += cell ? "true" : "false";
        } else if constexpr (std::is_floating_point_v<T>) {
            line += format_double(static_cast<double>(cell));
        } else {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof buf, cell);
            line.append(buf, r.ptr);
        }
    }

    std::filesystem::path file_;
    std::ofstream out_;
};

/// trajectory.csv (path, step, mode, value) for the first `max_paths` paths and tau.csv for all.
std::vector<std::filesystem::path> write_forward(const std::filesystem::path& dir, const ForwardEnsemble& forward,
                                                 std::size_t max_paths);
std::filesystem::path write_linearized(const std::filesystem::path& dir, const TimeGrid& grid,
                                       const std::vector<Matrix>& z, std::size_t max_paths);
/// regression.csv (step, basis_index, mode, value), zstar.csv, phi.csv and picard.csv.
std::vector<std::filesystem::path> write_backward(const std::filesystem::path& dir, const ForwardEnsemble& forward,
                                                  const BackwardSolution& backward, std::size_t max_paths);
std::filesystem::path write_history(const std::filesystem::path& dir, const std::vector<HistoryRow>& history);
std::filesystem::path write_control(const std::filesystem::path& dir, const std::string& name, const TimeGrid& grid,
                                    const ControlPath& u, std::size_t max_paths);
/// Operator eigenvalues, mode labels and tensor entries in COO triplets (JSON).
std::filesystem::path export_operator(const std::filesystem::path& dir, const SpectralOperator& op,
                                      const BilinearTensor& tensor);

/// 64-bit FNV-1a over bytes.
[[nodiscard]] std::uint64_t fnv1a(const std::string& bytes) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t v);
[[nodiscard]] std::string read_file(const std::filesystem::path& file);

}  // namespace gsmp::harness

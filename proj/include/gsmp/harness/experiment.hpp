#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gsmp/harness/config.hpp"

namespace gsmp::harness {

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_solver = 3, exit_acceptance = 4 };

inline constexpr const char* kVersion = "0.1.0";

/// Provenance of one command run: config hash, seeds, versions, timestamps and the files written.
struct RunManifest {
    std::string command;
    std::string config_text;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::size_t paths = 0;
    std::string seed_derivation = "splitmix64(splitmix64(master) ^ (path_index * 0xD1B54A32D192ED03 + 1)) -> mt19937_64";
    std::string version = kVersion;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::filesystem::path> files;

    void write(const std::filesystem::path& dir) const;
    /// Reads a manifest written by `write`; the embedded config can be re-run.
    static RunManifest load(const std::filesystem::path& file);
};

[[nodiscard]] std::string utc_now();

/// Each command writes its CSV artifacts and manifest.json into `out`, returning an exit code.
int cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_linearize(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_adjoint(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_duality_check(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_grad_check(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_optimize(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_invariants(const ExperimentConfig& config, const std::filesystem::path& out, const std::string& suite);
int cmd_export(const ExperimentConfig& config, const std::filesystem::path& out);

/// Dispatches by subcommand name and maps exceptions to exit codes.
int run_command(const std::string& command, const ExperimentConfig& config, const std::filesystem::path& out,
                const std::string& suite = "");

}  // namespace gsmp::harness

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gsmp/errors.hpp"
#include "gsmp/harness/experiment.hpp"

using namespace gsmp::harness;

int main(int argc, char** argv) {
    CLI::App app{"Stochastic control of Navier-Stokes type SPDEs with spectral Galerkin"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_file, manifest_file, suite;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "Run the stopped forward system and report the cost"},
        {"linearize", "Run the linearized system along a direction"},
        {"adjoint", "Solve the backward adjoint system by regression Picard iteration"},
        {"duality-check", "Compare both sides of the duality relation"},
        {"grad-check", "Compare difference quotients of the forward map and the cost"},
        {"optimize", "Projected fixed-point iteration for the optimal control"},
        {"invariants", "Run the invariant suites and print one PASS/FAIL line each"},
        {"export", "Write the discretized operator, tensor and noise to JSON and CSV"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        auto* cfg = sub->add_option("--config", config_file, "INI experiment config")->check(CLI::ExistingFile);
        sub->add_option("--manifest", manifest_file, "Re-run the config embedded in a manifest.json")
            ->check(CLI::ExistingFile)
            ->excludes(cfg);
        sub->add_option("--seed", seed, "Override the master seed");
        sub->add_option("--paths", paths, "Override the number of Monte Carlo paths");
        sub->add_option("--out", out, "Output directory")->capture_default_str();
        if (name == "invariants") sub->add_option("--suite", suite, "Only run this suite");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    ExperimentConfig config;
    try {
        if (!manifest_file.empty()) {
            const auto manifest = RunManifest::load(manifest_file);
            config = ExperimentConfig::from_string(manifest.config_text, std::filesystem::path(manifest_file).parent_path());
        } else if (!config_file.empty()) {
            config = ExperimentConfig::load(config_file);
        }
        if (seed) config.seed = *seed;
        if (paths) config.paths = *paths;
        config.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    }
    return run_command(command, config, out, suite);
}

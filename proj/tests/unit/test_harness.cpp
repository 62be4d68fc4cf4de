#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "gsmp/errors.hpp"
#include "gsmp/harness/experiment.hpp"
#include "gsmp/harness/invariants.hpp"
#include "gsmp/harness/io.hpp"
#include "json.hpp"

using namespace gsmp;
using namespace gsmp::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gsmp_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const char* kSmall = R"(
[operator]
instantiation = synthetic
K = 4
m_tilde_samples = 500

[noise]
kind = multiplicative
J = 2
sigma = 0.2

[grid]
T = 1
N = 16

[ensemble]
paths = 50
seed = 3
)";

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(GSMP_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing and defaults") {
    const auto c = ExperimentConfig::from_string(kSmall);
    CHECK(c.op.instantiation == TensorKind::synthetic);
    CHECK(c.op.K == 4);
    CHECK(c.N == 16);
    CHECK(c.paths == 50);
    CHECK(c.exponents.alpha == 0.45);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config errors name the offending field") {
    auto expect_field = [](const std::string& text, const std::string& field) {
        try {
            auto c = ExperimentConfig::from_string(text);
            c.validate();
            FAIL("expected a validation error for " << field);
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    expect_field("[grid]\nN = 0\n", "grid.N");
    expect_field("[grid]\nsteps = 4\n", "grid.steps");
    expect_field("[exponents]\nalpha = 0.9\n", "exponents");
    expect_field("[ensemble]\npaths = many\n", "ensemble.paths");
    expect_field("[noise]\nkind = levy\n", "noise.kind");
    expect_field("[unknown]\nx = 1\n", "unknown");
    expect_field("[target]\ny_d = file\n", "target.file");
    expect_field("[operator]\ninstantiation = synthetic\nK = 3\neigenvalues = 1,2\n", "operator.eigenvalues");
}

TEST_CASE("canonical text round trip") {
    const auto c = ExperimentConfig::from_string(kSmall);
    const auto text = c.canonical_text();
    const auto d = ExperimentConfig::from_string(text);
    CHECK(d.canonical_text() == text);
    CHECK(parse_list("1, 2.5,3", "x") == std::vector<double>{1.0, 2.5, 3.0});
    CHECK_THROWS_AS(parse_list("1,a", "x"), ValidationError);
}

TEST_CASE("target file loading") {
    const auto dir = scratch("target");
    {
        std::ofstream f(dir / "yd.csv");
        f << "step,mode,value\n0,0,1.5\n3,2,-2\n";
    }
    auto c = ExperimentConfig::from_string(std::string(kSmall) + "\n[target]\ny_d = file\nfile = yd.csv\n", dir);
    const auto problem = c.build_problem();
    const auto bc = c.build_backward(problem, sample_paths(problem, 2, 1));
    CHECK(bc.y_d(0, 0) == 1.5);
    CHECK(bc.y_d(3, 2) == -2.0);
    CHECK(bc.y_d(1, 1) == 0.0);
    {
        std::ofstream f(dir / "bad.csv");
        f << "step,mode,value\n99,0,1\n";
    }
    c.target.file = "bad.csv";
    CHECK_THROWS_AS((void)c.build_backward(problem, sample_paths(problem, 2, 1)), ValidationError);
}

TEST_CASE("csv writer and hashing") {
    const auto dir = scratch("csv");
    {
        CsvWriter w(dir / "a.csv", {"x", "y[unit]"});
        w.row(1, 0.25);
        w.row(std::string("s"), true);
    }
    CHECK(read_file(dir / "a.csv") == "x,y[unit]\n1,0.25\ns,true\n");
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("simulate: zero-noise heat run decays analytically and is reproducible") {
    auto c = ExperimentConfig::from_string(std::string(kSmall) + "\n");
    c.noise.kind = "none";
    c.op.tensor_scale = 0.0;
    c.paths = 1;
    const auto a = scratch("heat_a"), b = scratch("heat_b");
    REQUIRE(cmd_simulate(c, a) == exit_ok);
    REQUIRE(cmd_simulate(c, b) == exit_ok);
    for (const auto* f : {"trajectory.csv", "tau.csv", "cost.csv"}) CHECK(read_file(a / f) == read_file(b / f));

    const auto problem = c.build_problem();
    std::istringstream in(read_file(a / "trajectory.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line.find("path") == 0);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const auto step = std::stoul(cells[1]);
        const auto mode = std::stoul(cells[3]);
        const double expected = problem.forward.xi(static_cast<Eigen::Index>(mode)) *
                                std::exp(-problem.op.eigenvalues()[mode] * c.grid().t(step));
        REQUIRE(std::stod(cells[4]) == doctest::Approx(expected).epsilon(1e-13));
        ++rows;
    }
    CHECK(rows == 17 * 4);
}

TEST_CASE("manifest records files and rejects tampering") {
    const auto c = ExperimentConfig::from_string(kSmall);
    const auto dir = scratch("manifest");
    REQUIRE(cmd_simulate(c, dir) == exit_ok);
    const auto m = RunManifest::load(dir / "manifest.json");
    CHECK(m.command == "simulate");
    CHECK(m.master_seed == 3);
    CHECK(m.paths == 50);
    CHECK(m.files.size() == 3);
    auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    j["config"] = std::string(j["config"]) + "\n";
    std::ofstream(dir / "tampered.json") << j.dump();
    CHECK_THROWS_AS(RunManifest::load(dir / "tampered.json"), ValidationError);
}

TEST_CASE("export writes a readable operator description") {
    const auto c = ExperimentConfig::from_string(kSmall);
    const auto dir = scratch("export");
    REQUIRE(cmd_export(c, dir) == exit_ok);
    const auto j = nlohmann::json::parse(read_file(dir / "operator.json"));
    CHECK(j["eigenvalues"].size() == 4);
    CHECK(j["K"] == 4);
}

TEST_CASE("invariant suites") {
    auto c = ExperimentConfig::from_string(kSmall);
    CHECK(invariant_suites().size() == 5);
    const auto op_rows = run_invariants(c, "operator");
    for (const auto& r : op_rows) {
        CHECK(r.suite == "operator");
        CHECK_MESSAGE(r.passed, r.name);
    }
    CHECK_THROWS_AS((void)run_invariants(c, "nonsense"), ValidationError);

    c.op.corrupt_adjoint = true;
    bool adjoint_failed = false;
    for (const auto& r : run_invariants(c, "operator"))
        if (r.name == "bilinear_adjoint_identity") adjoint_failed = !r.passed;
    CHECK(adjoint_failed);
}

TEST_CASE("full invariant run with an empty filter") {
    const auto c = ExperimentConfig::from_string(kSmall);
    const auto rows = run_invariants(c, "");
    std::set<std::string> suites;
    for (const auto& r : rows) {
        suites.insert(r.suite);
        CHECK_MESSAGE(r.passed, r.suite << "/" << r.name << " value " << r.value << " threshold " << r.threshold);
    }
    CHECK(suites.size() == 5);
}

TEST_CASE("command-line exit codes") {
    const auto dir = scratch("cli");
    std::ofstream(dir / "small.ini") << kSmall;
    std::ofstream(dir / "bad.ini") << "[grid]\nN = 0\n";
    const std::string cfg = (dir / "small.ini").string();
    CHECK(run_cli("simulate --config " + cfg + " --out " + (dir / "sim").string()) == 0);
    CHECK(run_cli("simulate --config " + (dir / "bad.ini").string() + " --out " + (dir / "bad").string()) == 2);
    CHECK(run_cli("simulate --config " + cfg + " --paths 0 --out " + (dir / "zero").string()) == 2);
    CHECK(run_cli("invariants --config " + cfg + " --suite nonsense --out " + (dir / "inv").string()) == 2);
    CHECK(run_cli("invariants --config " + cfg + " --suite operator --out " + (dir / "inv").string()) == 0);
    std::ofstream(dir / "neg.ini") << kSmall << "\n";
    {
        auto text = std::string(kSmall);
        text.replace(text.find("m_tilde_samples"), 0, "corrupt_adjoint = true\n");
        std::ofstream(dir / "neg.ini") << text;
    }
    CHECK(run_cli("invariants --config " + (dir / "neg.ini").string() + " --suite operator --out " + (dir / "neg").string()) == 4);
    CHECK(run_cli("simulate --manifest " + (dir / "sim" / "manifest.json").string() + " --out " + (dir / "re").string()) == 0);
    CHECK(read_file(dir / "sim" / "trajectory.csv") == read_file(dir / "re" / "trajectory.csv"));
    CHECK(run_cli("simulate --config " + cfg + " --seed 9 --out " + (dir / "seed9").string()) == 0);
    CHECK(read_file(dir / "sim" / "trajectory.csv") != read_file(dir / "seed9" / "trajectory.csv"));
}

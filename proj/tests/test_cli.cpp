#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "levyms/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "levyms_test_cli";

int run(const std::string& args, const std::string& stderr_file = "/dev/null") {
    const std::string cmd = std::string(LEVYMS_TOOL) + " " + args + " > /dev/null 2> " + stderr_file;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_count(const fs::path& file) {
    const auto text = slurp(file);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kRoot);
    const auto file = kRoot / name;
    std::ofstream(file) << text;
    return file;
}

const std::string kQuick = R"([schedule]
M = 2
micro_dt = 5e-4
[experiment]
K = 6
n_paths = 3
)";

}  // namespace

TEST_CASE("compare writes two 1001-row trajectories, errors and a plot") {
    const auto cfg = write_config("compare.conf", kQuick);
    const auto out = kRoot / "compare";
    fs::remove_all(out);
    REQUIRE(run("compare --config " + cfg.string() + " --out " + out.string()) == 0);
    for (const char* name : {"pim.csv", "effective.csv"}) {
        CHECK(line_count(out / name) == 1 + 3 * 1001u);
    }
    CHECK(line_count(out / "errors.csv") == 4u);
    CHECK(slurp(out / "compare.svg").find("<polyline") != std::string::npos);
    CHECK(levyms::load_config(out / "manifest.txt").n_paths == 3);
    CHECK(slurp(out / "manifest.txt").find("# rejected_paths = none") != std::string::npos);
}

TEST_CASE("compare output is identical across reruns and thread counts") {
    const auto cfg = write_config("determinism.conf", kQuick);
    const auto a = kRoot / "det_a", b = kRoot / "det_b";
    REQUIRE(run("--threads 1 compare --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run("--threads 8 compare --config " + cfg.string() + " --out " + b.string()) == 0);
    for (const char* name : {"pim.csv", "effective.csv", "errors.csv", "compare.svg"}) {
        CAPTURE(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    // Rerun from the manifest.
    const auto c = kRoot / "det_c";
    REQUIRE(run("--threads 3 compare --config " + (a / "manifest.txt").string() + " --out " + c.string()) == 0);
    CHECK(slurp(a / "pim.csv") == slurp(c / "pim.csv"));
}

TEST_CASE("simulate-effective on a logged noise path matches compare") {
    const auto cfg = write_config("pipeline.conf", kQuick);
    const auto pim = kRoot / "pipe_pim", eff = kRoot / "pipe_eff", cmp = kRoot / "pipe_cmp";
    REQUIRE(run("simulate-pim --config " + cfg.string() + " --out " + pim.string()) == 0);
    REQUIRE(run("simulate-effective --config " + cfg.string() + " --out " + eff.string() + " --noise-log " +
                (pim / "noise_0.csv").string()) == 0);
    REQUIRE(run("compare --config " + cfg.string() + " --out " + cmp.string()) == 0);
    const auto from_log = levyms::parse_trajectory_csv(eff / "effective.csv");
    const auto compared = levyms::parse_trajectory_csv(cmp / "effective.csv");
    CHECK(from_log.at(0).states == compared.at(0).states);
    CHECK(levyms::parse_trajectory_csv(pim / "pim.csv").at(2).states ==
          levyms::parse_trajectory_csv(cmp / "pim.csv").at(2).states);

    // Drawing the noise afresh reproduces the same increments.
    const auto drawn = kRoot / "pipe_drawn";
    REQUIRE(run("simulate-effective --config " + cfg.string() + " --out " + drawn.string()) == 0);
    CHECK(levyms::parse_trajectory_csv(drawn / "effective.csv").at(1).states == compared.at(1).states);
}

TEST_CASE("simulate-full stores the macro grid") {
    const auto cfg = write_config("full.conf", "[schedule]\nT = 0.5\n[experiment]\nfull_dt = 1e-4\nn_paths = 1\n");
    const auto out = kRoot / "full";
    REQUIRE(run("simulate-full --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "full.csv") == 502u);
}

TEST_CASE("convergence writes a five-level report with a slope") {
    const auto cfg = write_config("conv.conf", R"([schedule]
M = 1
micro_dt = 1e-3
T = 0.1
[experiment]
K = 4
)");
    const auto out = kRoot / "conv";
    REQUIRE(run("convergence --lmax 5 --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto report = slurp(out / "report.csv");
    CHECK(line_count(out / "report.csv") == 7u);
    CHECK(report.find("# slope=") != std::string::npos);
    CHECK(slurp(out / "convergence.svg").find("fit slope") != std::string::npos);
}

TEST_CASE("weak writes one row per test function") {
    const auto cfg = write_config("weak.conf", kQuick + "weak_coupling = shared\n");
    const auto out = kRoot / "weak";
    REQUIRE(run("weak --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "weak.csv") == 4u);
}

TEST_CASE("sample-stable writes draws and an ECF summary") {
    const auto out = kRoot / "draws.csv";
    REQUIRE(run("sample-stable --alpha 1.5 --n 20000 --dt 1 --seed 3 --out " + out.string()) == 0);
    CHECK(line_count(out) == 20001u);
    CHECK(line_count(out.string() + ".ecf.csv") == 9u);
    CHECK(run("sample-stable --alpha 2.5 --n 10 --out " + out.string()) == 2);
}

TEST_CASE("failures exit with their code and a JSON record") {
    const auto err = kRoot / "stderr.txt";
    const auto bad = write_config("bad.conf", "[system]\nalpha1 = 1.5\nalpah2 = 1.5\n");
    CHECK(run("compare --config " + bad.string() + " --out " + (kRoot / "bad").string(), err.string()) == 2);
    const auto record = nlohmann::json::parse(slurp(err));
    CHECK(record["error"] == "config");
    CHECK(record["key"] == "alpah2");
    CHECK(record["line"] == 3);
    CHECK(record["exit_code"] == 2);

    const auto budget = write_config("budget.conf", "[experiment]\nmicro_budget = 500\n");
    const auto budget_out = kRoot / "budget";
    fs::remove_all(budget_out);
    CHECK(run("convergence --config " + budget.string() + " --out " + budget_out.string(), err.string()) == 4);
    CHECK(nlohmann::json::parse(slurp(err))["level"] == 1);
    CHECK_FALSE(fs::exists(budget_out));

    const auto blowup = write_config("blowup.conf", R"([system]
name = expanding_fast
epsilon = 1e-3
[experiment]
drift = empirical
full_dt = 1e-3
)");
    CHECK(run("simulate-full --config " + blowup.string() + " --out " + (kRoot / "blowup").string(), err.string()) == 3);
    CHECK(nlohmann::json::parse(slurp(err))["error"] == "ensemble");

    CHECK(run("no-such-command") == 2);
    CHECK(run("") == 2);
    CHECK(run("--help") == 0);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "levyms/io.hpp"

using namespace levyms;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "levyms_test_io";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::string> lines_of(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

int error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line;
    }
    return -1;
}

std::string error_key(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.key;
    }
    return "";
}

}  // namespace

TEST_CASE("defaults describe the worked example") {
    const ExperimentConfig c;
    CHECK(c.x0 == 10);
    CHECK(c.y0 == 10);
    CHECK(c.alpha1 == 1.5);
    CHECK(c.micro_count == 100);
    CHECK(c.macro_dt == 1e-3);
    CHECK(c.micro_dt == c.macro_dt / c.micro_count);
    CHECK(c.make_schedule().macro_steps() == 1000u);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config parses sections, comments and overrides") {
    const auto c = parse_config(R"(# experiment
[system]
name = cubic_fast
alpha1 = 1.8   # slow noise
alpha2 = 1.6
sigma2 = 0.5

[schedule]
M = 7
micro_dt = 1e-4
restart = cold

[experiment]
p = 1.2
K = 50
master_seed = 18446744073709551615
drift = empirical
weak_coupling = shared

[output]
dir = results/run1
)");
    CHECK(c.system == "cubic_fast");
    CHECK(c.alpha1 == 1.8);
    CHECK(c.sigma2 == 0.5);
    CHECK(c.micro_count == 7);
    CHECK(c.restart == RestartPolicy::Cold);
    CHECK(c.paths == 50);
    CHECK(c.master_seed == 18446744073709551615ULL);
    CHECK(c.drift == DriftMode::Empirical);
    CHECK(c.weak_coupling == NoiseCoupling::Shared);
    CHECK(c.output_dir == "results/run1");
    CHECK(c.macro_dt == 1e-3);  // untouched default
}

TEST_CASE("config round-trips through its canonical text") {
    ExperimentConfig c;
    c.alpha2 = 1.7;
    c.epsilon = 1.0 / 3.0;
    c.micro_dt = 1e-3 / 7;
    c.restart = RestartPolicy::Cold;
    c.drift = DriftMode::Empirical;
    c.weak_function = "gauss";
    c.estimator_dt = 2.5e-3;
    c.master_seed = 42;
    const auto text = serialize_config(c);
    CHECK(parse_config(text) == c);
    CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("config errors name the key and line") {
    CHECK(error_line("[system]\nalpha1 = 1.5\nalpah2 = 1.5\n") == 3);
    CHECK(error_key("[system]\nalpha1 = 1.5\nalpah2 = 1.5\n") == "alpah2");
    CHECK(error_line("[system]\nalpha1 = 1.5\n\nalpha1 = 1.6\n") == 4);
    CHECK(error_line("[schedule]\nalpha1 = 1.5\n") == 2);
    CHECK(error_line("[system]\nalpha1 = fast\n") == 2);
    CHECK(error_line("[system]\nalpha1 = 1.5x\n") == 2);
    CHECK(error_line("[schedule]\nM = 2.5\n") == 2);
    CHECK(error_line("[nonsense]\n") == 1);
    CHECK(error_line("[system\n") == 1);
    CHECK(error_line("[system]\nalpha1\n") == 2);
    CHECK(error_line("alpha1 = 1.5\n") == 1);
    CHECK(error_line("[schedule]\nrestart = lukewarm\n") == 2);
    CHECK(error_line("[experiment]\nmaster_seed = -1\n") == 2);
}

TEST_CASE("config validation re-checks numeric constraints") {
    CHECK(error_key("[system]\nalpha1 = 2.5\n") == "alpha1");
    CHECK(error_key("[system]\nepsilon = 0\n") == "epsilon");
    CHECK(error_key("[system]\nname = lorenz\n") == "name");
    CHECK(error_key("[schedule]\nmicro_dt = 0.01\n") == "micro_dt");
    CHECK(error_key("[schedule]\nM = 0\n") == "M");
    CHECK(error_key("[schedule]\nburn_in = 100\n") == "burn_in");
    CHECK(error_key("[experiment]\np = 1.5\n") == "p");
    CHECK(error_key("[experiment]\nK = 0\n") == "K");
    CHECK(error_key("[experiment]\nn_paths = 500\n") == "n_paths");
    CHECK(error_key("[experiment]\nweak_function = sinc\n") == "weak_function");
    CHECK(error_key("[experiment]\nestimator_dt = 0\n") == "estimator_dt");
    CHECK(error_key("[system]\nname = linear\n") == "drift");
    CHECK(error_key("[system]\nsigma2 = 2\n") == "drift");
    CHECK_NOTHROW(parse_config("[system]\nname = linear\n[experiment]\ndrift = empirical\n"));
    CHECK_THROWS_AS(load_config("/nonexistent/levyms.conf"), ConfigError);
}

TEST_CASE("manifest parses back to the same config") {
    ExperimentConfig c;
    c.paths = 17;
    c.epsilon = 0.01;
    const auto file = scratch("manifest.txt");
    write_manifest(file, c, "compare", {{"rejected_paths", "none"}});
    CHECK(load_config(file) == c);
    const auto lines = lines_of(file);
    CHECK(lines.at(1) == "# version = " + version_string());
    CHECK(lines.at(2) == "# subcommand = compare");
}

TEST_CASE("trajectory CSV layout and exact round trip") {
    Trajectory<double> two(1, 2);
    two.times = {0.0, 0.1};
    two.states << 1.0 / 3.0, -2e-300;
    const auto file = scratch("two.csv");
    emit_trajectory_csv(two, 4, file);
    const auto lines = lines_of(file);
    REQUIRE(lines.size() == 3u);
    CHECK(lines[0] == "path_id,step,t,value");
    CHECK(lines[1] == "4,0,0,0.33333333333333331");

    const auto back = parse_trajectory_csv(file);
    REQUIRE(back.count(4) == 1u);
    CHECK(back.at(4).times == two.times);
    CHECK(back.at(4).states == two.states);

    Trajectory<double> planar(2, 3);
    planar.times = {0, 0.5, 1};
    planar.states << 1, 2, 3, 4.25, 5, 6;
    emit_trajectory_csv(std::vector<Trajectory<double>>{planar, planar}, file);
    CHECK(lines_of(file)[0] == "path_id,step,t,value,value_dim2");
    const auto many = parse_trajectory_csv(file);
    CHECK(many.size() == 2u);
    CHECK(many.at(1).states == planar.states);
    CHECK(trajectory_csv_header(3) == "path_id,step,t,value,value_dim2,value_dim3");
}

TEST_CASE("trajectory CSV surfaces IO and format problems") {
    Trajectory<double> t(1, 2);
    t.times = {0.0, 1.0};
    t.states << 0, 1;
    CHECK_THROWS_WITH_AS(emit_trajectory_csv(t, 0, "/proc/levyms/forbidden.csv"), doctest::Contains("levyms"),
                         std::exception);
    const auto bad = scratch("bad.csv");
    std::ofstream(bad) << "path_id,step,t,value\n0,0,0,1\n0,2,1,1\n";
    CHECK_THROWS_AS(parse_trajectory_csv(bad), ParameterError);
    std::ofstream(bad) << "a,b\n";
    CHECK_THROWS_AS(parse_trajectory_csv(bad), ParameterError);
}

TEST_CASE("noise log round trip") {
    Matrix<double> log(2, 3);
    log << 0.1, -1e-5, 3.0 / 7.0, 1e10, 0, -2.5;
    const auto file = scratch("noise.csv");
    emit_noise_log_csv(log, file);
    CHECK(lines_of(file)[0] == "step,dl,dl_dim2");
    CHECK(parse_noise_log_csv(file) == log);
}

TEST_CASE("error report CSV") {
    ErrorReport r;
    LevelResult lv;
    lv.level = 1;
    lv.macro_dt = 1e-3;
    lv.micro_dt = 5e-4;
    lv.micro_count = 6;
    lv.paths = 10;
    lv.accepted = 9;
    lv.e_p = 0.25;
    lv.std_error = 0.125;
    r.levels.push_back(lv);
    r.has_slope = true;
    r.slope = -0.5;
    r.slope_ci = 0.25;
    const auto file = scratch("report.csv");
    emit_error_report_csv(r, file);
    const auto lines = lines_of(file);
    REQUIRE(lines.size() == 3u);
    CHECK(lines[0] == "l,macro_dt,micro_dt,M,K,accepted,E_p,stderr");
    CHECK(lines[1] == "1,0.001,0.00050000000000000001,6,10,9,0.25,0.125");
    CHECK(lines[2] == "# slope=-0.5 ci95=0.25");
}

TEST_CASE("svg plots") {
    PlotStyle style;
    style.title = "flat <line>";
    const auto svg = render_svg_plot({{"c", {0, 1, 2, 3}, {2, 2, 2, 2}}}, style);
    CHECK(svg.find("<svg") == 0u);
    CHECK(svg.find("flat &lt;line&gt;") != std::string::npos);
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex(R"(<polyline[^>]*points="([^"]*)\")")));
    std::istringstream pts(m[1].str());
    std::set<std::string> ys;
    for (std::string pt; pts >> pt;) ys.insert(pt.substr(pt.find(',') + 1));
    CHECK(ys.size() == 1u);

    const std::vector<int> levels{1, 2, 3, 4, 5};
    const std::vector<double> errors{0.3324, 0.1711, 0.0759, 0.0444, 0.0270};
    const auto fit = fit_log2_slope(levels, errors);
    PlotSeries s{"E_p", {}, {}};
    for (std::size_t i = 0; i < levels.size(); ++i) {
        s.xs.push_back(levels[i]);
        s.ys.push_back(std::log2(errors[i]));
    }
    style.fit_slope = fit.slope;
    const auto fitted = render_svg_plot({s}, style);
    REQUIRE(std::regex_search(fitted, m, std::regex(R"(fit slope (-?[0-9.]+))")));
    CHECK(std::abs(std::stod(m[1].str()) - fit.slope) < 0.01);

    const auto file = scratch("empty.svg");
    fs::remove(file);
    CHECK_THROWS_AS(emit_svg_plot({}, style, file), ParameterError);
    CHECK_THROWS_AS(emit_svg_plot({{"none", {}, {}}}, style, file), ParameterError);
    CHECK_FALSE(fs::exists(file));
}

TEST_CASE("format_real restores the exact double") {
    for (double v : {0.1, 1.0 / 3.0, 1e-320, -123456.789, 6.02214076e23}) {
        CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
    }
}

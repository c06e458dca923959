#ifndef LEVYMS_IO_HPP
#define LEVYMS_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "levyms/analysis.hpp"
#include "levyms/effective.hpp"
#include "levyms/errors.hpp"
#include "levyms/pim.hpp"
#include "levyms/system.hpp"

namespace levyms {

/// Malformed or invalid configuration; names the key and 1-based line.
class ConfigError : public ParameterError {
public:
    ConfigError(const std::string& what, std::string key_name, int line_number)
        : ParameterError(what), key(std::move(key_name)), line(line_number) {}

    std::string key;
    int line;
};

enum class DriftMode { Quadrature, Empirical };

/// Everything an experiment needs. Defaults reproduce the worked example:
/// x0 = y0 = 10, alpha = 1.5, M = 100, dt = 1e-3, micro dt = dt / M, T = 1.
struct ExperimentConfig {
    // [system]
    std::string system = "paper_example";
    double alpha1 = 1.5;
    double alpha2 = 1.5;
    double sigma1 = 1;
    double sigma2 = 1;
    double epsilon = 0.1;
    double x0 = 10;
    double y0 = 10;
    // [schedule]
    double macro_dt = 1e-3;
    double micro_dt = 1e-5;
    long micro_count = 100;
    double horizon = 1;
    long burn_in = 0;
    RestartPolicy restart = RestartPolicy::Warm;
    // [experiment]
    double p = 1.4;
    long paths = 200;
    int l_max = 5;
    std::uint64_t master_seed = 20240501;
    double full_dt = 1e-3;  // direct solver step (simulate-full)
    long micro_budget = 1'000'000;
    long n_paths = 1;  // trajectories written by simulate-* and compare
    DriftMode drift = DriftMode::Quadrature;
    long estimator_samples = 50000;  // empirical drift: averaged steps per node
    double estimator_dt = 1e-2;
    long estimator_burn_in = 500;
    std::string weak_function = "all";
    NoiseCoupling weak_coupling = NoiseCoupling::Independent;
    // [output]
    std::string output_dir = "out";

    /// Re-checks every numeric constraint of the types built from it.
    void validate() const;

    SlowFastSystem<double> make_system() const;
    PimSchedule<double> make_schedule() const;
    EffectiveDrift<double> make_drift() const;
    EnsembleOptions make_options(int threads) const;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Unknown sections or keys, duplicates and malformed values are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Writes config plus `# key = value` provenance lines. The result parses
/// back to the same config, so reruns from a manifest reproduce outputs.
void write_manifest(const std::filesystem::path& file, const ExperimentConfig& config, const std::string& subcommand,
                    const std::map<std::string, std::string>& extra);

std::string version_string();

/// 17 significant digits; strtod restores the exact double.
std::string format_real(double v);

/// Header: path_id,step,t,value[,value_dim2,...]
std::string trajectory_csv_header(int dim);
void append_trajectory_rows(std::ostream& out, const Trajectory<double>& traj, long path_id);
void emit_trajectory_csv(const Trajectory<double>& traj, long path_id, const std::filesystem::path& destination);
void emit_trajectory_csv(const std::vector<Trajectory<double>>& trajs, const std::filesystem::path& destination);

/// Reads a trajectory CSV back, keyed by path_id.
std::map<long, Trajectory<double>> parse_trajectory_csv(const std::filesystem::path& source);

/// Header: step,dl[,dl_dim2,...]; one row per macro step.
void emit_noise_log_csv(const Matrix<double>& noise_log, const std::filesystem::path& destination);
Matrix<double> parse_noise_log_csv(const std::filesystem::path& source);

/// Columns l,macro_dt,micro_dt,M,K,accepted,E_p,stderr and a `# slope=...`
/// footer when a slope was fitted.
void emit_error_report_csv(const ErrorReport& report, const std::filesystem::path& destination);

struct PlotSeries {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct PlotStyle {
    std::string title;
    std::string x_label = "t";
    std::string y_label = "x";
    int width = 720;
    int height = 480;
    // Fitted line y = intercept + slope * x, drawn and labeled when set.
    std::optional<double> fit_slope;
    double fit_intercept = 0;
};

/// Self-contained SVG with axes, tick labels and a legend. Rejects empty
/// input before touching the destination.
std::string render_svg_plot(const std::vector<PlotSeries>& series, const PlotStyle& style);
void emit_svg_plot(const std::vector<PlotSeries>& series, const PlotStyle& style,
                   const std::filesystem::path& destination);

}  // namespace levyms

#endif  // LEVYMS_IO_HPP

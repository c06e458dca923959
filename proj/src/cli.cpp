#include "levyms/cli.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "levyms/analysis.hpp"
#include "levyms/io.hpp"
#include "levyms/parallel.hpp"
#include "levyms/sde.hpp"
#include "levyms/stable.hpp"

namespace levyms {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
    int threads = 1;
    std::string config_path;
    std::string out_dir;  // overrides [output] dir when set
};

ExperimentConfig load(const GlobalOptions& g) {
    ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
    if (!g.out_dir.empty()) c.output_dir = g.out_dir;
    return c;
}

std::ofstream open_csv(const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

// Paths that left the finite range come back empty and are listed in the manifest.
struct PathSet {
    std::vector<std::optional<Trajectory<double>>> paths;
    std::vector<long> rejected;
};

template <typename Fn>
PathSet run_paths(std::size_t count, int threads, Fn&& fn) {
    PathSet set;
    set.paths.resize(count);
    parallel_for(count, threads, [&](std::size_t k) {
        try {
            set.paths[k] = fn(k);
        } catch (const OverflowError&) {
            set.paths[k].reset();
        }
    });
    for (std::size_t k = 0; k < count; ++k) {
        if (!set.paths[k]) set.rejected.push_back(static_cast<long>(k));
    }
    if (set.rejected.size() == count) throw EnsembleError("every path left the finite range");
    return set;
}

void write_paths(const PathSet& set, const fs::path& file) {
    auto out = open_csv(file);
    int dim = 0;
    for (const auto& p : set.paths) {
        if (p) dim = p->dim();
    }
    out << trajectory_csv_header(dim) << '\n';
    for (std::size_t k = 0; k < set.paths.size(); ++k) {
        if (set.paths[k]) append_trajectory_rows(out, *set.paths[k], static_cast<long>(k));
    }
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

std::string join_ids(const std::vector<long>& ids) {
    std::string s;
    for (long id : ids) s += (s.empty() ? "" : " ") + std::to_string(id);
    return s.empty() ? "none" : s;
}

fs::path prepare_dir(const ExperimentConfig& c) {
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    return dir;
}

Eigen::VectorXd constant(double v) { return Eigen::VectorXd::Constant(1, v); }

int cmd_sample_stable(double alpha, long n, double dt, std::uint64_t seed, const std::string& out_file) {
    if (n < 1) throw ParameterError("--n must be >= 1");
    const StableSpec<double> spec{alpha, 1.0};
    spec.validate();
    RngStream rng = RngStream(seed, 0).child(StreamRole::Sample);
    Eigen::VectorXd xs(n);
    fill_stable_increments(spec, dt, rng, xs);

    const fs::path file(out_file);
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    {
        auto out = open_csv(file);
        out << "index,value\n";
        for (Eigen::Index i = 0; i < xs.size(); ++i) out << i << ',' << format_real(xs[i]) << '\n';
        if (!out) throw std::runtime_error("failed writing " + file.string());
    }

    // Empirical characteristic function against exp(-dt |u|^alpha).
    const double bound = 3 / std::sqrt(static_cast<double>(n)) + 1e-3;
    json summary = {{"alpha", alpha}, {"n", n}, {"dt", dt}, {"seed", seed}, {"bound", bound}};
    json rows = json::array();
    fs::path ecf_file = file;
    ecf_file += ".ecf.csv";
    auto ecf = open_csv(ecf_file);
    ecf << "u,ecf_re,ecf_im,target,deviation\n";
    double worst = 0;
    for (double u : {-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0}) {
        std::complex<double> sum = 0;
        for (double x : xs) sum += std::polar(1.0, u * x);
        sum /= static_cast<double>(n);
        const double target = std::exp(-dt * std::pow(std::abs(u), alpha));
        const double dev = std::abs(sum - target);
        worst = std::max(worst, dev);
        ecf << format_real(u) << ',' << format_real(sum.real()) << ',' << format_real(sum.imag()) << ','
            << format_real(target) << ',' << format_real(dev) << '\n';
        rows.push_back({{"u", u}, {"deviation", dev}});
    }
    summary["ecf"] = rows;
    summary["max_deviation"] = worst;
    summary["within_bound"] = worst <= bound;
    std::cout << summary.dump() << '\n';
    return 0;
}

int cmd_simulate_full(const GlobalOptions& g) {
    const auto c = load(g);
    const auto dir = prepare_dir(c);
    const auto system = c.make_system();
    const std::size_t thin = std::max<std::size_t>(1, whole_steps(c.macro_dt, c.full_dt));
    bool under_resolved = false;
    const auto set = run_paths(static_cast<std::size_t>(c.n_paths), g.threads, [&](std::size_t k) {
        auto run = simulate_full(system, constant(c.x0), constant(c.y0), c.full_dt, c.horizon, RngStream(c.master_seed, k),
                                 thin);
        if (k == 0) under_resolved = run.under_resolved;
        return run.slow;
    });
    write_paths(set, dir / "full.csv");
    write_manifest(dir / "manifest.txt", c, "simulate-full",
                   {{"rejected_paths", join_ids(set.rejected)},
                    {"under_resolved", under_resolved ? "true" : "false"}});
    return 0;
}

int cmd_simulate_pim(const GlobalOptions& g) {
    const auto c = load(g);
    const auto dir = prepare_dir(c);
    const auto system = c.make_system();
    const auto sched = c.make_schedule();
    std::vector<Matrix<double>> logs(static_cast<std::size_t>(c.n_paths));
    const auto set = run_paths(logs.size(), g.threads, [&](std::size_t k) {
        auto run = run_pim(system, constant(c.x0), constant(c.y0), sched, RngStream(c.master_seed, k));
        logs[k] = std::move(run.noise_log);
        return run.slow;
    });
    write_paths(set, dir / "pim.csv");
    for (std::size_t k = 0; k < logs.size(); ++k) {
        if (set.paths[k]) emit_noise_log_csv(logs[k], dir / ("noise_" + std::to_string(k) + ".csv"));
    }
    write_manifest(dir / "manifest.txt", c, "simulate-pim", {{"rejected_paths", join_ids(set.rejected)}});
    return 0;
}

int cmd_simulate_effective(const GlobalOptions& g, const std::string& noise_log_file) {
    const auto c = load(g);
    const auto dir = prepare_dir(c);
    const auto system = c.make_system();
    const auto sched = c.make_schedule();
    const auto drift = c.make_drift();
    std::optional<Matrix<double>> supplied;
    if (!noise_log_file.empty()) supplied = parse_noise_log_csv(noise_log_file);
    const std::size_t count = supplied ? 1 : static_cast<std::size_t>(c.n_paths);
    // Without a supplied log, path k draws the same slow increments as simulate-pim path k.
    const auto set = run_paths(count, g.threads, [&](std::size_t k) {
        const RngStream rng(c.master_seed, k);
        const Matrix<double> noise = supplied ? *supplied : draw_noise_log(system, sched, rng.child(StreamRole::Slow));
        return run_effective(drift, system, constant(c.x0), sched, noise, rng.child(StreamRole::Effective));
    });
    write_paths(set, dir / "effective.csv");
    write_manifest(dir / "manifest.txt", c, "simulate-effective",
                   {{"rejected_paths", join_ids(set.rejected)},
                    {"noise_log", noise_log_file.empty() ? "drawn" : noise_log_file}});
    return 0;
}

int cmd_compare(const GlobalOptions& g) {
    const auto c = load(g);
    const auto dir = prepare_dir(c);
    const auto system = c.make_system();
    const auto sched = c.make_schedule();
    const auto drift = c.make_drift();
    const auto count = static_cast<std::size_t>(c.n_paths);
    std::vector<std::optional<Trajectory<double>>> effective(count);
    const auto pim = run_paths(count, g.threads, [&](std::size_t k) {
        const RngStream rng(c.master_seed, k);
        auto run = run_pim(system, constant(c.x0), constant(c.y0), sched, rng);
        effective[k] = run_effective(drift, system, constant(c.x0), sched, run.noise_log, rng.child(StreamRole::Effective));
        return run.slow;
    });
    PathSet eff{effective, pim.rejected};
    write_paths(pim, dir / "pim.csv");
    write_paths(eff, dir / "effective.csv");

    auto out = open_csv(dir / "errors.csv");
    out << "path_id,E_p,sup\n";
    for (std::size_t k = 0; k < count; ++k) {
        if (!pim.paths[k]) continue;
        out << k << ',' << format_real(lp_path_error(*pim.paths[k], *effective[k], c.p)) << ','
            << format_real(lp_path_error(*pim.paths[k], *effective[k], c.p, PathErrorNorm::Sup)) << '\n';
    }
    out.close();

    for (std::size_t k = 0; k < count; ++k) {
        if (!pim.paths[k]) continue;
        const auto& a = *pim.paths[k];
        const auto& b = *effective[k];
        std::vector<double> ya(a.size()), yb(b.size());
        for (std::size_t i = 0; i < a.size(); ++i) ya[i] = a.states(0, static_cast<Eigen::Index>(i));
        for (std::size_t i = 0; i < b.size(); ++i) yb[i] = b.states(0, static_cast<Eigen::Index>(i));
        PlotStyle style;
        style.title = "PIM vs effective dynamics, path " + std::to_string(k);
        emit_svg_plot({{"PIM", a.times, ya}, {"effective", b.times, yb}}, style, dir / "compare.svg");
        break;
    }
    write_manifest(dir / "manifest.txt", c, "compare", {{"rejected_paths", join_ids(pim.rejected)}});
    return 0;
}

int cmd_convergence(const GlobalOptions& g, std::optional<int> l_max) {
    auto c = load(g);
    if (l_max) c.l_max = *l_max;
    c.validate();
    const auto system = c.make_system();
    const auto sched = c.make_schedule();
    // Budget check before any simulation or output.
    schedule_levels(c.l_max, c.p, c.alpha2, sched, c.micro_budget);
    const auto dir = prepare_dir(c);
    const auto drift = c.make_drift();
    const auto report = convergence_study(system, sched, drift, c.p, static_cast<std::size_t>(c.paths), c.l_max,
                                          c.make_options(g.threads), c.micro_budget);
    emit_error_report_csv(report, dir / "report.csv");

    PlotSeries series{"log2 E_p", {}, {}};
    for (const auto& r : report.levels) {
        if (!r.valid || !(r.e_p > 0)) continue;
        series.xs.push_back(r.level);
        series.ys.push_back(std::log2(r.e_p));
    }
    PlotStyle style;
    style.title = "Strong error against refinement level";
    style.x_label = "l";
    style.y_label = "log2 E_p";
    if (report.has_slope) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < series.xs.size(); ++i) {
            mx += series.xs[i];
            my += series.ys[i];
        }
        mx /= static_cast<double>(series.xs.size());
        my /= static_cast<double>(series.ys.size());
        style.fit_slope = report.slope;
        style.fit_intercept = my - report.slope * mx;
    }
    if (!series.xs.empty()) emit_svg_plot({series}, style, dir / "convergence.svg");

    std::map<std::string, std::string> extra;
    for (const auto& r : report.levels) {
        extra["rejected_level_" + std::to_string(r.level)] = std::to_string(r.rejected);
    }
    write_manifest(dir / "manifest.txt", c, "convergence", extra);
    return 0;
}

int cmd_weak(const GlobalOptions& g) {
    const auto c = load(g);
    const auto dir = prepare_dir(c);
    const auto system = c.make_system();
    const auto sched = c.make_schedule();
    const auto drift = c.make_drift();
    const auto suite = c.weak_function == "all" ? WeakTestSuite::defaults() : WeakTestSuite::only(c.weak_function);
    const auto errors = weak_error_ensemble(system, sched, drift, suite, static_cast<std::size_t>(c.paths),
                                            c.make_options(g.threads), c.weak_coupling);
    auto out = open_csv(dir / "weak.csv");
    out << "function,value,stderr,step,t\n";
    for (const auto& e : errors) {
        out << e.name << ',' << format_real(e.value) << ',' << format_real(e.std_error) << ',' << e.time_index << ','
            << format_real(static_cast<double>(e.time_index) * c.macro_dt) << '\n';
    }
    out.close();
    write_manifest(dir / "manifest.txt", c, "weak", {});
    return 0;
}

int report_failure(const std::string& kind, const std::string& message, int code, json extra = json::object()) {
    json record = {{"error", kind}, {"message", message}, {"exit_code", code}};
    record.update(extra);
    std::cerr << record.dump() << '\n';
    return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Projective integration for slow-fast SDEs with alpha-stable noise", "levyms"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--threads", g.threads, "Worker threads for path ensembles")->check(CLI::Range(1, 1024));

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", g.config_path, "Experiment config file (a manifest also works)");
        sub->add_option("--out", g.out_dir, "Output directory, overrides [output] dir");
    };

    double alpha = 1.5, dt = 1;
    long n = 100000;
    std::uint64_t seed = 20240501;
    std::string sample_out;
    auto* sample = app.add_subcommand("sample-stable", "Draw symmetric stable increments and check their ECF");
    sample->add_option("--alpha", alpha, "Stability index in (0, 2]")->required();
    sample->add_option("--n", n, "Number of draws")->required();
    sample->add_option("--dt", dt, "Time increment; dt = 0 yields zeros");
    sample->add_option("--seed", seed, "Master seed");
    sample->add_option("--out", sample_out, "Output CSV file")->required();

    auto* full = app.add_subcommand("simulate-full", "Direct solver on the coupled system");
    add_config(full);
    auto* pim = app.add_subcommand("simulate-pim", "Projective integration of the slow variable");
    add_config(pim);
    std::string noise_log;
    auto* eff = app.add_subcommand("simulate-effective", "Averaged slow equation");
    add_config(eff);
    eff->add_option("--noise-log", noise_log, "Reuse slow increments written by simulate-pim");
    auto* compare = app.add_subcommand("compare", "Coupled PIM and effective paths with per-path errors");
    add_config(compare);
    std::optional<int> l_max;
    auto* convergence = app.add_subcommand("convergence", "Strong error over refinement levels");
    add_config(convergence);
    convergence->add_option("--lmax", l_max, "Highest refinement level");
    auto* weak = app.add_subcommand("weak", "Weak error of PIM against the effective dynamics");
    add_config(weak);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_failure("usage", e.what(), 2);
    }

    try {
        if (*sample) return cmd_sample_stable(alpha, n, dt, seed, sample_out);
        if (*full) return cmd_simulate_full(g);
        if (*pim) return cmd_simulate_pim(g);
        if (*eff) return cmd_simulate_effective(g, noise_log);
        if (*compare) return cmd_compare(g);
        if (*convergence) return cmd_convergence(g, l_max);
        if (*weak) return cmd_weak(g);
    } catch (const ConfigError& e) {
        return report_failure("config", e.what(), 2, {{"key", e.key}, {"line", e.line}});
    } catch (const ParameterError& e) {
        return report_failure("parameter", e.what(), 2);
    } catch (const NumericalError& e) {
        return report_failure("numerical", e.what(), 3,
                              {{"first_estimate", e.first_estimate}, {"second_estimate", e.second_estimate}});
    } catch (const OverflowError& e) {
        return report_failure("overflow", e.what(), 3, {{"step", e.step}});
    } catch (const EnsembleError& e) {
        return report_failure("ensemble", e.what(), 3);
    } catch (const BudgetError& e) {
        return report_failure("budget", e.what(), 4, {{"level", e.level}});
    } catch (const std::exception& e) {
        return report_failure("io", e.what(), 1);
    }
    return 0;
}

}  // namespace levyms

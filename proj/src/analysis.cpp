#include "levyms/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <boost/math/distributions/students_t.hpp>

#include "levyms/errors.hpp"
#include "levyms/parallel.hpp"

namespace levyms {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_grid(const Trajectory<double>& a, const Trajectory<double>& b) {
    if (a.times.size() != b.times.size() || a.dim() != b.dim()) {
        throw ParameterError("lp_path_error: trajectories have different grids or dimensions");
    }
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        if (a.times[k] != b.times[k]) throw ParameterError("lp_path_error: grid mismatch at index " + std::to_string(k));
    }
}

void require_moment_order(const SlowFastSystem<double>& system, double p) {
    const double limit = std::min(system.noise1.alpha, system.noise2.alpha);
    if (!(p > 1 && p < limit) && !(limit == 2 && p > 1 && p <= 2)) {
        throw ParameterError("moment order p must lie in (1, min(alpha1, alpha2)) = (1, " + std::to_string(limit) + ")");
    }
}

PimSchedule<double> fine_grid(double dt, double horizon) {
    PimSchedule<double> s;
    s.macro_dt = dt;
    s.micro_dt = dt;
    s.micro_count = 1;
    s.horizon = horizon;
    return s;
}

}  // namespace

double lp_path_error(const Trajectory<double>& a, const Trajectory<double>& b, double p, PathErrorNorm norm) {
    require_same_grid(a, b);
    if (!(p > 0)) throw ParameterError("lp_path_error: p must be > 0");
    if (a.size() < 2) return 0;
    const double horizon = a.times.back() - a.times.front();
    double total = 0;
    double worst = 0;
    for (std::size_t n = 1; n < a.size(); ++n) {
        const auto idx = static_cast<Eigen::Index>(n);
        const double gap = std::pow((a.states.col(idx) - b.states.col(idx)).norm(), p);
        total += (a.times[n] - a.times[n - 1]) / horizon * gap;
        worst = std::max(worst, gap);
    }
    switch (norm) {
        case PathErrorNorm::TimeAverage: return total;
        case PathErrorNorm::Sup: return worst;
        case PathErrorNorm::Rooted: return std::pow(total, 1 / p);
    }
    return total;
}

StrongErrorResult summarize_path_errors(std::vector<double> per_path) {
    StrongErrorResult out;
    double sum = 0;
    for (double e : per_path) {
        if (std::isnan(e)) {
            ++out.rejected;
            continue;
        }
        ++out.accepted;
        sum += e;
    }
    if (out.accepted == 0) throw EnsembleError("all " + std::to_string(per_path.size()) + " paths were rejected");
    out.e_p = sum / static_cast<double>(out.accepted);
    double ss = 0;
    for (double e : per_path) {
        if (!std::isnan(e)) ss += (e - out.e_p) * (e - out.e_p);
    }
    if (out.accepted > 1) {
        out.std_error = std::sqrt(ss / static_cast<double>(out.accepted - 1) / static_cast<double>(out.accepted));
    }
    out.per_path = std::move(per_path);
    return out;
}

StrongErrorResult strong_error_ensemble(const SlowFastSystem<double>& system, const PimSchedule<double>& sched,
                                        const EffectiveDrift<double>& drift, double p, std::size_t paths,
                                        const EnsembleOptions& options, PathErrorNorm norm) {
    if (paths < 1) throw ParameterError("strong_error_ensemble: K must be >= 1");
    require_moment_order(system, p);
    system.validate();
    sched.validate();
    drift.check_compatible(system);

    std::vector<double> per_path(paths, kNaN);
    parallel_for(paths, options.threads, [&](std::size_t k) {
        const RngStream rng(options.seed, k);
        try {
            const auto pim = run_pim(system, options.x0, options.y0, sched, rng);
            const auto eff = run_effective(drift, system, options.x0, sched, pim.noise_log, rng.child(StreamRole::Effective));
            per_path[k] = lp_path_error(pim.slow, eff, p, norm);
        } catch (const OverflowError&) {
            per_path[k] = kNaN;
        }
    });
    return summarize_path_errors(std::move(per_path));
}

StrongErrorResult averaging_error_ensemble(const SlowFastSystem<double>& system, const EffectiveDrift<double>& drift,
                                           double dt, double horizon, double p, std::size_t paths,
                                           const EnsembleOptions& options) {
    if (paths < 1) throw ParameterError("averaging_error_ensemble: K must be >= 1");
    require_moment_order(system, p);
    const auto grid = fine_grid(dt, horizon);
    std::vector<double> per_path(paths, kNaN);
    parallel_for(paths, options.threads, [&](std::size_t k) {
        const RngStream rng(options.seed, k);
        try {
            const auto full = simulate_full(system, options.x0, options.y0, dt, horizon, rng);
            const auto eff = run_effective(drift, system, options.x0, grid, full.slow_noise, rng.child(StreamRole::Effective));
            per_path[k] = lp_path_error(full.slow, eff, p, PathErrorNorm::Sup);
        } catch (const OverflowError&) {
            per_path[k] = kNaN;
        }
    });
    return summarize_path_errors(std::move(per_path));
}

WeakTestSuite WeakTestSuite::defaults() {
    return {{
        {"cos", [](double x) { return std::cos(x); }},
        {"gauss", [](double x) { return std::exp(-x * x); }},
        {"lorentz", [](double x) { return 1 / (1 + x * x); }},
    }};
}

WeakTestSuite WeakTestSuite::only(const std::string& name) {
    for (auto& f : defaults().functions) {
        if (f.name == name) return {{f}};
    }
    throw ParameterError("unknown weak test function '" + name + "'");
}

std::vector<WeakError> weak_error_from_paths(const std::vector<Trajectory<double>>& a,
                                             const std::vector<Trajectory<double>>& b, const WeakTestSuite& suite,
                                             bool paired) {
    if (a.empty() || b.empty()) throw ParameterError("weak_error_from_paths: empty ensemble");
    if (paired && a.size() != b.size()) throw ParameterError("weak_error_from_paths: paired ensembles differ in size");
    const std::size_t points = a.front().size();
    for (const auto* ens : {&a, &b}) {
        for (const auto& t : *ens) {
            if (t.size() != points) throw ParameterError("weak_error_from_paths: grid mismatch");
        }
    }
    const auto mean_var = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        const double var = v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0;
        return std::pair{m, var};
    };

    std::vector<WeakError> out;
    std::vector<double> va(a.size()), vb(b.size()), diff(paired ? a.size() : 0);
    for (const auto& f : suite.functions) {
        WeakError best{f.name, -1, 0, 0};
        for (std::size_t n = 0; n < points; ++n) {
            const auto idx = static_cast<Eigen::Index>(n);
            for (std::size_t k = 0; k < a.size(); ++k) va[k] = f.phi(a[k].states(0, idx));
            for (std::size_t k = 0; k < b.size(); ++k) vb[k] = f.phi(b[k].states(0, idx));
            const auto [ma, vara] = mean_var(va);
            const auto [mb, varb] = mean_var(vb);
            const double gap = std::abs(ma - mb);
            if (gap > best.value) {
                double se = 0;
                if (paired) {
                    for (std::size_t k = 0; k < a.size(); ++k) diff[k] = va[k] - vb[k];
                    se = std::sqrt(mean_var(diff).second / static_cast<double>(diff.size()));
                } else {
                    se = std::sqrt(vara / static_cast<double>(va.size()) + varb / static_cast<double>(vb.size()));
                }
                best = {f.name, gap, se, n};
            }
        }
        out.push_back(best);
    }
    return out;
}

std::vector<WeakError> weak_error_ensemble(const SlowFastSystem<double>& system, const PimSchedule<double>& sched,
                                           const EffectiveDrift<double>& drift, const WeakTestSuite& suite,
                                           std::size_t paths, const EnsembleOptions& options, NoiseCoupling coupling) {
    if (paths < 1) throw ParameterError("weak_error_ensemble: K must be >= 1");
    system.validate();
    sched.validate();
    drift.check_compatible(system);

    std::vector<Trajectory<double>> pim_paths(paths), eff_paths(paths);
    std::vector<char> ok(paths, 0);
    parallel_for(paths, options.threads, [&](std::size_t k) {
        const RngStream rng(options.seed, k);
        try {
            auto pim = run_pim(system, options.x0, options.y0, sched, rng);
            const Matrix<double> noise = coupling == NoiseCoupling::Shared
                                             ? pim.noise_log
                                             : draw_noise_log(system, sched, rng.child(StreamRole::Effective));
            eff_paths[k] = run_effective(drift, system, options.x0, sched, noise, rng.child(StreamRole::Effective));
            pim_paths[k] = std::move(pim.slow);
            ok[k] = 1;
        } catch (const OverflowError&) {
        }
    });
    std::vector<Trajectory<double>> a, b;
    for (std::size_t k = 0; k < paths; ++k) {
        if (!ok[k]) continue;
        a.push_back(std::move(pim_paths[k]));
        b.push_back(std::move(eff_paths[k]));
    }
    if (a.empty()) throw EnsembleError("weak_error_ensemble: all paths were rejected");
    return weak_error_from_paths(a, b, suite, coupling == NoiseCoupling::Shared);
}

PimSchedule<double> scale_schedule(const PimSchedule<double>& base, int level, double p, double alpha) {
    if (level < 0) throw ParameterError("scale_schedule: level must be >= 0");
    if (!(p > 0) || !(alpha > 0)) throw ParameterError("scale_schedule: p and alpha must be > 0");
    PimSchedule<double> s = base;
    if (level == 0) return s;
    const double l = level;
    s.micro_dt = base.micro_dt * std::exp2(-l * alpha / p);
    const double count = static_cast<double>(base.micro_count) * std::exp2((2 + alpha) * l / p);
    if (!(count < 9.0e18)) throw BudgetError("micro_count overflows at level " + std::to_string(level), level);
    s.micro_count = static_cast<long>(std::ceil(count - 1e-9));
    return s;
}

std::vector<PimSchedule<double>> schedule_levels(int l_max, double p, double alpha, const PimSchedule<double>& base,
                                                 long micro_budget) {
    if (l_max < 1) throw ParameterError("schedule_levels: l_max must be >= 1");
    base.validate();
    std::vector<PimSchedule<double>> out;
    for (int l = 1; l <= l_max; ++l) {
        auto s = scale_schedule(base, l, p, alpha);
        if (s.micro_count > micro_budget) {
            throw BudgetError("level " + std::to_string(l) + " needs micro_count " + std::to_string(s.micro_count) +
                                  " > budget " + std::to_string(micro_budget),
                              l);
        }
        s.validate();
        out.push_back(s);
    }
    return out;
}

double strong_error_bound(const PimSchedule<double>& sched, double p, double alpha, double beta) {
    const double m = static_cast<double>(sched.micro_count);
    const double window = m * sched.micro_dt;
    const double mixing = std::max(0.0, std::log(window) + beta) / (m * beta * sched.micro_dt);
    return std::pow(sched.micro_dt, p / alpha) + std::pow(mixing, p / 2) + std::pow(1 / m, p / 2);
}

SlopeFit fit_log2_slope(const std::vector<int>& levels, const std::vector<double>& errors) {
    if (levels.size() != errors.size()) throw ParameterError("fit_log2_slope: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (errors[i] > 0 && std::isfinite(errors[i])) {
            xs.push_back(levels[i]);
            ys.push_back(std::log2(errors[i]));
        }
    }
    const std::size_t n = xs.size();
    if (n < 3) throw ParameterError("fit_log2_slope: need at least 3 levels with E_p > 0, have " + std::to_string(n));

    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 2);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        design(static_cast<Eigen::Index>(i), 0) = 1;
        design(static_cast<Eigen::Index>(i), 1) = xs[i];
        rhs(static_cast<Eigen::Index>(i)) = ys[i];
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd resid = rhs - design * coef;

    double mean_x = 0;
    for (double x : xs) mean_x += x;
    mean_x /= static_cast<double>(n);
    double sxx = 0;
    for (double x : xs) sxx += (x - mean_x) * (x - mean_x);

    SlopeFit fit;
    fit.slope = coef(1);
    fit.levels_used = n;
    const double dof = static_cast<double>(n - 2);
    const double sigma2 = resid.squaredNorm() / dof;
    const boost::math::students_t dist(dof);
    fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * std::sqrt(sigma2 / sxx);
    return fit;
}

SlopeFit fit_log2_slope(const ErrorReport& report) {
    std::vector<int> levels;
    std::vector<double> errors;
    for (const auto& lv : report.levels) {
        if (!lv.valid) continue;
        levels.push_back(lv.level);
        errors.push_back(lv.e_p);
    }
    return fit_log2_slope(levels, errors);
}

ErrorReport convergence_study(const SlowFastSystem<double>& system, const PimSchedule<double>& base,
                              const EffectiveDrift<double>& drift, double p, std::size_t paths, int l_max,
                              const EnsembleOptions& options, long micro_budget) {
    const auto schedules = schedule_levels(l_max, p, system.noise2.alpha, base, micro_budget);
    ErrorReport report;
    for (std::size_t i = 0; i < schedules.size(); ++i) {
        const auto& s = schedules[i];
        LevelResult lv;
        lv.level = static_cast<int>(i + 1);
        lv.macro_dt = s.macro_dt;
        lv.micro_dt = s.micro_dt;
        lv.micro_count = s.micro_count;
        lv.paths = paths;
        try {
            const auto res = strong_error_ensemble(system, s, drift, p, paths, options);
            lv.accepted = res.accepted;
            lv.rejected = res.rejected;
            lv.e_p = res.e_p;
            lv.std_error = res.std_error;
            lv.valid = res.rejected * 10 < paths;
        } catch (const EnsembleError&) {
            lv.accepted = 0;
            lv.rejected = paths;
            lv.e_p = kNaN;
            lv.valid = false;
        }
        report.levels.push_back(lv);
    }
    try {
        const auto fit = fit_log2_slope(report);
        report.has_slope = true;
        report.slope = fit.slope;
        report.slope_ci = fit.half_width;
    } catch (const ParameterError&) {
        report.has_slope = false;
    }
    return report;
}

}  // namespace levyms

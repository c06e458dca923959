#ifndef LEVYMS_ANALYSIS_HPP
#define LEVYMS_ANALYSIS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "levyms/effective.hpp"
#include "levyms/pim.hpp"
#include "levyms/system.hpp"

namespace levyms {

enum class PathErrorNorm {
    TimeAverage,  // sum_{n=1..N} (dt_n / T) |a_n - b_n|^p, no root
    Sup,          // max_n |a_n - b_n|^p
    Rooted,       // TimeAverage^{1/p}
};

/// Pathwise p-th power deviation between two trajectories on the same grid.
double lp_path_error(const Trajectory<double>& a, const Trajectory<double>& b, double p,
                     PathErrorNorm norm = PathErrorNorm::TimeAverage);

struct EnsembleOptions {
    std::uint64_t seed = 20240501;
    int threads = 1;
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 10.0);
    Eigen::VectorXd y0 = Eigen::VectorXd::Constant(1, 10.0);
};

struct StrongErrorResult {
    double e_p = 0;
    double std_error = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<double> per_path;  // NaN for rejected paths
};

/// Averages a per-path error (NaN marks rejection) in path order.
StrongErrorResult summarize_path_errors(std::vector<double> per_path);

/// K coupled (PIM, effective) path pairs sharing slow noise; path k uses
/// RngStream(seed, k). Requires 1 < p < min(alpha1, alpha2).
StrongErrorResult strong_error_ensemble(const SlowFastSystem<double>& system, const PimSchedule<double>& sched,
                                        const EffectiveDrift<double>& drift, double p, std::size_t paths,
                                        const EnsembleOptions& options,
                                        PathErrorNorm norm = PathErrorNorm::TimeAverage);

/// Direct solver at step dt vs the effective equation driven by the same
/// slow increments; per-path error is sup_n |X_n - Xbar_n|^p.
StrongErrorResult averaging_error_ensemble(const SlowFastSystem<double>& system, const EffectiveDrift<double>& drift,
                                           double dt, double horizon, double p, std::size_t paths,
                                           const EnsembleOptions& options);

/// Bounded smooth test function of the first slow coordinate.
struct TestFunction {
    std::string name;
    std::function<double(double)> phi;
};

struct WeakTestSuite {
    std::vector<TestFunction> functions;

    /// cos(x), exp(-x^2), 1/(1+x^2).
    static WeakTestSuite defaults();
    static WeakTestSuite only(const std::string& name);
};

struct WeakError {
    std::string name;
    double value = 0;      // max_n |mean phi(a_n) - mean phi(b_n)|
    double std_error = 0;  // at the maximizing grid index
    std::size_t time_index = 0;
};

enum class NoiseCoupling { Independent, Shared };

/// Weak discrepancy between two path ensembles on a common grid. With
/// `paired`, the standard error uses per-path differences.
std::vector<WeakError> weak_error_from_paths(const std::vector<Trajectory<double>>& a,
                                             const std::vector<Trajectory<double>>& b, const WeakTestSuite& suite,
                                             bool paired);

std::vector<WeakError> weak_error_ensemble(const SlowFastSystem<double>& system, const PimSchedule<double>& sched,
                                           const EffectiveDrift<double>& drift, const WeakTestSuite& suite,
                                           std::size_t paths, const EnsembleOptions& options,
                                           NoiseCoupling coupling = NoiseCoupling::Independent);

/// Refinement level l of `base`: micro_dt * 2^{-l alpha/p} and
/// ceil(micro_count * 2^{(2 + alpha) l / p}); the macro grid is unchanged.
PimSchedule<double> scale_schedule(const PimSchedule<double>& base, int level, double p, double alpha);

/// Levels 1..l_max. Throws BudgetError when any micro_count exceeds
/// `micro_budget`.
std::vector<PimSchedule<double>> schedule_levels(int l_max, double p, double alpha, const PimSchedule<double>& base,
                                                 long micro_budget = 100'000'000);

/// (dt)^{p/alpha} + ((ln(M dt) + beta)/(M beta dt))^{p/2} + (1/M)^{p/2}, with
/// the logarithmic numerator clamped at zero when M dt is small.
double strong_error_bound(const PimSchedule<double>& sched, double p, double alpha, double beta);

struct LevelResult {
    int level = 0;
    double macro_dt = 0;
    double micro_dt = 0;
    long micro_count = 0;
    std::size_t paths = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double e_p = 0;
    double std_error = 0;
    bool valid = true;  // fewer than 10% of paths rejected
};

struct SlopeFit {
    double slope = 0;
    double half_width = 0;
    std::size_t levels_used = 0;
};

struct ErrorReport {
    std::vector<LevelResult> levels;
    bool has_slope = false;
    double slope = 0;
    double slope_ci = 0;
    std::map<std::string, double> weak_errors;
};

/// OLS of log2(E_p) on l over valid levels with E_p > 0; 95% half-width
/// from the residuals. Needs at least 3 usable levels.
SlopeFit fit_log2_slope(const ErrorReport& report);
SlopeFit fit_log2_slope(const std::vector<int>& levels, const std::vector<double>& errors);

/// Runs strong_error_ensemble on every refinement level and fits the slope.
ErrorReport convergence_study(const SlowFastSystem<double>& system, const PimSchedule<double>& base,
                              const EffectiveDrift<double>& drift, double p, std::size_t paths, int l_max,
                              const EnsembleOptions& options, long micro_budget = 100'000'000);

}  // namespace levyms

#endif  // LEVYMS_ANALYSIS_HPP

#ifndef LEVYMS_EFFECTIVE_HPP
#define LEVYMS_EFFECTIVE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "levyms/errors.hpp"
#include "levyms/pim.hpp"
#include "levyms/quadrature.hpp"
#include "levyms/rng.hpp"
#include "levyms/stable.hpp"
#include "levyms/system.hpp"

namespace levyms {

/// The coefficient abar = int exp(-y^2) rho(y) dy for the invariant density
/// rho of dY = -Y dt + dL^alpha, computed two independent ways.
struct AbarQuadrature {
    double value;            // y-space route: exp(-y^2) against stable_density
    double parseval;         // xi-space route, prefactor 1/(2 sqrt(pi))
    double printed_variant;  // same xi integral, prefactor alpha^{1/alpha}/(2 sqrt(2)); diagnostic only
};

inline double abar_xi_integral(double alpha, const QuadratureConfig& config = {}) {
    // int_R exp(-xi^2/4 - |xi|^alpha/alpha) d xi; exp(-xi^2/4) < 1e-21 beyond |xi| = 14.
    auto integrand = [alpha](double xi) { return std::exp(-xi * xi / 4 - std::pow(xi, alpha) / alpha); };
    return 2 * integrate_simpson<double>(integrand, 0.0, 14.0, config).value;
}

inline AbarQuadrature compute_abar_quadrature(double alpha, const QuadratureConfig& config = {}) {
    StableSpec<double>{alpha, 1.0}.validate();

    const double xi_integral = abar_xi_integral(alpha, config);
    const double parseval = xi_integral / (2 * std::sqrt(std::numbers::pi));
    const double printed = std::pow(alpha, 1 / alpha) / (2 * std::numbers::sqrt2) * xi_integral;

    QuadratureConfig outer = config;
    outer.tolerance = 1e-9;
    outer.initial_intervals = 128;
    const StableSpec<double> spec{alpha, 1.0};
    auto integrand = [&](double y) { return std::exp(-y * y) * stable_density(spec, y, alpha, config); };
    const double direct = 2 * integrate_simpson<double>(integrand, 0.0, 6.5, outer).value;

    if (std::abs(direct - parseval) > 1e-3) {
        throw NumericalError("compute_abar_quadrature: routes disagree", direct, parseval);
    }
    return {direct, parseval, printed};
}

template <typename Scalar = double>
struct EmpiricalDriftConfig {
    long samples = 50000;    // averaged micro steps per estimate
    Scalar micro_dt = Scalar(1e-2);
    long burn_in = 500;
    Scalar max_stderr = Scalar(0.05);  // warning threshold on the batch-means standard error
    // Optional cache on [grid_lo, grid_hi] (scalar slow state only); 0 nodes disables it.
    Scalar grid_lo = Scalar(-15);
    Scalar grid_hi = Scalar(15);
    int grid_nodes = 0;
};

template <typename Scalar = double>
struct DriftEstimate {
    Vector<Scalar> value;
    Scalar stderr_estimate = 0;
    bool high_variance = false;
};

/// The averaged slow drift fbar1(x) = int f1(x, y) mu_x(dy).
///
/// QuadratureExample: -x + abar sin(x), valid for the `paper_example` system.
/// Empirical: long frozen-slow micro average of f1(x, .), optionally cached
/// on a grid with linear interpolation. Custom: a user-supplied closed form.
template <typename Scalar = double>
class EffectiveDrift {
public:
    enum class Mode { QuadratureExample, Empirical, Custom };
    using Closed = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

    static EffectiveDrift quadrature_example(Scalar alpha) {
        EffectiveDrift d;
        d.mode_ = Mode::QuadratureExample;
        d.abar_ = static_cast<Scalar>(compute_abar_quadrature(static_cast<double>(alpha)).value);
        return d;
    }

    static EffectiveDrift with_abar(Scalar abar) {
        EffectiveDrift d;
        d.mode_ = Mode::QuadratureExample;
        d.abar_ = abar;
        return d;
    }

    static EffectiveDrift empirical(const EmpiricalDriftConfig<Scalar>& config = {}) {
        if (config.samples < 20 || !(config.micro_dt > 0) || config.burn_in < 0) {
            throw ParameterError("empirical drift: need samples >= 20, micro_dt > 0, burn_in >= 0");
        }
        EffectiveDrift d;
        d.mode_ = Mode::Empirical;
        d.config_ = config;
        return d;
    }

    static EffectiveDrift custom(Closed fn) {
        EffectiveDrift d;
        d.mode_ = Mode::Custom;
        d.closed_ = std::move(fn);
        return d;
    }

    Mode mode() const { return mode_; }
    Scalar abar() const { return abar_; }
    const EmpiricalDriftConfig<Scalar>& config() const { return config_; }
    bool cached() const { return !cache_.empty(); }

    void check_compatible(const SlowFastSystem<Scalar>& system) const {
        if (mode_ == Mode::QuadratureExample && system.name != "paper_example") {
            throw ParameterError("quadrature effective drift is only valid for paper_example, not '" + system.name + "'");
        }
    }

    /// Fills the interpolation cache. Node i uses stream rng.child(Estimator, i).
    void prepare(const SlowFastSystem<Scalar>& system, const RngStream& rng) {
        check_compatible(system);
        cache_.clear();
        if (mode_ != Mode::Empirical || config_.grid_nodes < 2 || system.dim_slow != 1) return;
        std::vector<Scalar> values(static_cast<std::size_t>(config_.grid_nodes));
        for (int i = 0; i < config_.grid_nodes; ++i) {
            Vector<Scalar> x(1);
            x(0) = node(i);
            RngStream node_rng = rng.child(StreamRole::Estimator, static_cast<std::uint64_t>(i));
            values[static_cast<std::size_t>(i)] = estimate(system, x, node_rng).value(0);
        }
        cache_ = std::move(values);
    }

    DriftEstimate<Scalar> evaluate(const Vector<Scalar>& x, const SlowFastSystem<Scalar>& system, RngStream& rng) const {
        switch (mode_) {
            case Mode::QuadratureExample: {
                check_compatible(system);
                DriftEstimate<Scalar> out;
                out.value = (-x.array() + abar_ * x.array().sin()).matrix();
                return out;
            }
            case Mode::Custom:
                return {closed_(x), 0, false};
            case Mode::Empirical:
                if (!cache_.empty() && x(0) >= config_.grid_lo && x(0) <= config_.grid_hi) {
                    return {interpolate(x(0)), 0, false};
                }
                return estimate(system, x, rng);
        }
        throw ParameterError("effective drift: unknown mode");
    }

private:
    Scalar node(int i) const {
        return config_.grid_lo + (config_.grid_hi - config_.grid_lo) * static_cast<Scalar>(i) /
                                     static_cast<Scalar>(config_.grid_nodes - 1);
    }

    Vector<Scalar> interpolate(Scalar x) const {
        const Scalar h = (config_.grid_hi - config_.grid_lo) / static_cast<Scalar>(config_.grid_nodes - 1);
        const Scalar pos = (x - config_.grid_lo) / h;
        auto i = static_cast<std::size_t>(std::floor(pos));
        if (i >= cache_.size() - 1) i = cache_.size() - 2;
        const Scalar w = pos - static_cast<Scalar>(i);
        Vector<Scalar> out(1);
        out(0) = (1 - w) * cache_[i] + w * cache_[i + 1];
        return out;
    }

    // Frozen-slow chain from y = 0, averaged after burn-in; the standard error
    // comes from 20 batch means.
    DriftEstimate<Scalar> estimate(const SlowFastSystem<Scalar>& system, const Vector<Scalar>& x, RngStream& rng) const {
        constexpr long kBatches = 20;
        const IncrementSampler<Scalar> noise(system.noise2, config_.micro_dt);
        Vector<Scalar> y = Vector<Scalar>::Zero(system.dim_fast);
        Vector<Scalar> fast_drift(system.dim_fast), increment(system.dim_fast), slow_drift(system.dim_slow);
        auto advance = [&] {
            system.f2(x, y, fast_drift);
            noise.fill(rng, increment);
            y += fast_drift * config_.micro_dt + system.sigma2 * increment;
            if (!within_reject_threshold(y)) throw OverflowError("empirical drift: fast state left the finite range", 0);
        };
        for (long m = 0; m < config_.burn_in; ++m) advance();

        const long per_batch = config_.samples / kBatches;
        Matrix<Scalar> batch_means = Matrix<Scalar>::Zero(system.dim_slow, kBatches);
        for (long b = 0; b < kBatches; ++b) {
            for (long m = 0; m < per_batch; ++m) {
                advance();
                system.f1(x, y, slow_drift);
                batch_means.col(b) += slow_drift;
            }
        }
        batch_means /= static_cast<Scalar>(per_batch);
        DriftEstimate<Scalar> out;
        out.value = batch_means.rowwise().mean();
        const Scalar var = (batch_means.colwise() - out.value).squaredNorm() / static_cast<Scalar>(kBatches - 1);
        out.stderr_estimate = std::sqrt(var / static_cast<Scalar>(kBatches));
        out.high_variance = out.stderr_estimate > config_.max_stderr;
        return out;
    }

    Mode mode_ = Mode::Custom;
    Scalar abar_ = 0;
    EmpiricalDriftConfig<Scalar> config_{};
    Closed closed_;
    std::vector<Scalar> cache_;
};

/// Free-function form of EffectiveDrift::evaluate.
template <typename Scalar>
DriftEstimate<Scalar> effective_drift(const Vector<Scalar>& x, const EffectiveDrift<Scalar>& drift,
                                      const SlowFastSystem<Scalar>& system, RngStream& rng) {
    return drift.evaluate(x, system, rng);
}

/// Euler-Maruyama of the averaged equation consuming exactly the increments
/// in `noise_log` (column n for macro step n). Empirical estimates at step n
/// draw from rng.child(Estimator, n) when not served by the cache.
template <typename Scalar>
Trajectory<Scalar> run_effective(const EffectiveDrift<Scalar>& drift, const SlowFastSystem<Scalar>& system,
                                 const Vector<Scalar>& x0, const PimSchedule<Scalar>& sched,
                                 const Matrix<Scalar>& noise_log, const RngStream& rng = RngStream(0, 0)) {
    drift.check_compatible(system);
    if (static_cast<std::size_t>(noise_log.cols()) < sched.macro_steps()) {
        throw ParameterError("run_effective: noise log has " + std::to_string(noise_log.cols()) + " increments, need " +
                             std::to_string(sched.macro_steps()));
    }
    auto traj = run_slow_em(
        [&](const Vector<Scalar>& x, std::size_t n) {
            if (drift.mode() != EffectiveDrift<Scalar>::Mode::Empirical) {
                RngStream unused = rng;
                return drift.evaluate(x, system, unused).value;
            }
            RngStream step_rng = rng.child(StreamRole::Estimator, n);
            return drift.evaluate(x, system, step_rng).value;
        },
        x0, system.sigma1, sched, noise_log);
    traj.meta = {rng.master_seed(), "effective", system.name};
    return traj;
}

}  // namespace levyms

#endif  // LEVYMS_EFFECTIVE_HPP

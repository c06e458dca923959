#ifndef LEVYMS_PIM_HPP
#define LEVYMS_PIM_HPP

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "levyms/errors.hpp"
#include "levyms/rng.hpp"
#include "levyms/sde.hpp"
#include "levyms/stable.hpp"
#include "levyms/system.hpp"

namespace levyms {

enum class RestartPolicy {
    Warm,  // micro run n starts from the last micro state of run n-1
    Cold,  // every micro run starts from y0
};

template <typename Scalar = double>
struct PimSchedule {
    Scalar macro_dt = Scalar(1e-3);
    Scalar micro_dt = Scalar(1e-5);
    long micro_count = 100;
    Scalar horizon = 1;
    long burn_in = 0;
    RestartPolicy restart = RestartPolicy::Warm;

    void validate() const {
        if (!(macro_dt > 0) || !std::isfinite(macro_dt)) throw ParameterError("macro_dt must be finite and > 0");
        if (!(micro_dt > 0) || !(micro_dt <= macro_dt)) throw ParameterError("micro_dt must satisfy 0 < micro_dt <= macro_dt");
        if (micro_count < 1) throw ParameterError("micro_count must be >= 1");
        if (!(horizon >= macro_dt) || !std::isfinite(horizon)) throw ParameterError("horizon must be >= macro_dt");
        if (burn_in < 0 || burn_in >= micro_count) throw ParameterError("burn_in must satisfy 0 <= burn_in < micro_count");
    }

    std::size_t macro_steps() const { return whole_steps(horizon, macro_dt); }
};

/// One micro run: the fast states Y_0..Y_M and the drift estimate A(x).
template <typename Scalar = double>
struct MicroBatch {
    Matrix<Scalar> states;  // dim_fast x (M + 1)
    Vector<Scalar> drift_estimate;
};

namespace detail {

// Runs the frozen-slow micro recursion Y <- Y + f2(x, Y) dt + sigma2 dL on the
// rescaled (epsilon-free) fast equation. `y` holds Y_0 on entry and Y_M on
// exit; `visit(m, Y_m)` sees every state. Returns the running mean of
// f1(x, Y_m) over m = burn_in + 1 .. M, which is exact for constant summands.
template <typename Scalar, typename Visit>
Vector<Scalar> micro_average(const SlowFastSystem<Scalar>& system, const Vector<Scalar>& x, Vector<Scalar>& y,
                             const PimSchedule<Scalar>& sched, RngStream& rng, std::size_t macro_index,
                             Visit&& visit) {
    const IncrementSampler<Scalar> noise(system.noise2, sched.micro_dt);
    Vector<Scalar> fast_drift(system.dim_fast);
    Vector<Scalar> increment(system.dim_fast);
    Vector<Scalar> slow_drift(system.dim_slow);
    Vector<Scalar> mean = Vector<Scalar>::Zero(system.dim_slow);

    visit(0L, y);
    long averaged = 0;
    for (long m = 1; m <= sched.micro_count; ++m) {
        system.f2(x, y, fast_drift);
        noise.fill(rng, increment);
        y += fast_drift * sched.micro_dt + system.sigma2 * increment;
        if (!within_reject_threshold(y)) {
            throw OverflowError("micro solver: fast state left the finite range", macro_index,
                                static_cast<std::size_t>(m));
        }
        visit(m, y);
        if (m > sched.burn_in) {
            system.f1(x, y, slow_drift);
            ++averaged;
            mean += (slow_drift - mean) / static_cast<Scalar>(averaged);
        }
    }
    return mean;
}

}  // namespace detail

/// Micro solver with the slow variable frozen at `x_frozen`. The estimate
/// averages f1(x_frozen, Y_m) over m = burn_in+1..M.
template <typename Scalar>
MicroBatch<Scalar> micro_solve(const SlowFastSystem<Scalar>& system, const Vector<Scalar>& x_frozen,
                               const Vector<Scalar>& y_init, const PimSchedule<Scalar>& sched, RngStream rng,
                               std::size_t macro_index = 0) {
    system.validate();
    sched.validate();
    if (x_frozen.size() != system.dim_slow || y_init.size() != system.dim_fast) {
        throw ParameterError("micro_solve: state dimension mismatch");
    }
    if (!x_frozen.allFinite()) throw ParameterError("micro_solve: frozen slow state is not finite");

    MicroBatch<Scalar> batch;
    batch.states.resize(system.dim_fast, sched.micro_count + 1);
    Vector<Scalar> y = y_init;
    batch.drift_estimate = detail::micro_average(system, x_frozen, y, sched, rng, macro_index,
                                                 [&](long m, const Vector<Scalar>& state) { batch.states.col(m) = state; });
    return batch;
}

/// Macro Euler-Maruyama step driven by the estimated drift.
template <typename Scalar>
Vector<Scalar> macro_step(const Vector<Scalar>& x, const MicroBatch<Scalar>& batch, const PimSchedule<Scalar>& sched,
                          const Vector<Scalar>& noise_increment, Scalar sigma1, std::size_t macro_index = 0) {
    return em_step(x, batch.drift_estimate, sched.macro_dt, noise_increment, sigma1, macro_index);
}

/// Slow path plus the exact slow increments it consumed (column n is the
/// unscaled dL over macro step n), so an effective run can share the noise.
template <typename Scalar = double>
struct PimRun {
    Trajectory<Scalar> slow;
    Matrix<Scalar> noise_log;
    Vector<Scalar> last_fast;
};

/// Draws the unscaled slow increments for every macro step of `sched`.
template <typename Scalar>
Matrix<Scalar> draw_noise_log(const SlowFastSystem<Scalar>& system, const PimSchedule<Scalar>& sched, RngStream rng) {
    const IncrementSampler<Scalar> noise(system.noise1, sched.macro_dt);
    Matrix<Scalar> log(system.dim_slow, static_cast<Eigen::Index>(sched.macro_steps()));
    for (Eigen::Index n = 0; n < log.cols(); ++n) {
        for (Eigen::Index i = 0; i < log.rows(); ++i) log(i, n) = noise(rng);
    }
    return log;
}

/// Projective integration: per macro step, a micro run with the slow
/// variable frozen estimates the averaged drift, then an Euler-Maruyama
/// macro step advances the slow variable. Never divides by epsilon.
///
/// Noise layout for a path stream `rng`: macro increments from
/// rng.child(Slow), micro run n from rng.child(Micro, n).
template <typename Scalar>
PimRun<Scalar> run_pim(const SlowFastSystem<Scalar>& system, const Vector<Scalar>& x0, const Vector<Scalar>& y0,
                       const PimSchedule<Scalar>& sched, const RngStream& rng) {
    system.validate();
    sched.validate();
    if (x0.size() != system.dim_slow || y0.size() != system.dim_fast) {
        throw ParameterError("run_pim: initial state dimension mismatch");
    }

    const std::size_t steps = sched.macro_steps();
    PimRun<Scalar> run;
    run.slow = Trajectory<Scalar>(system.dim_slow, steps + 1);
    run.slow.meta = {rng.master_seed(), "pim", system.name};
    run.noise_log = draw_noise_log(system, sched, rng.child(StreamRole::Slow));

    Vector<Scalar> x = x0;
    Vector<Scalar> y = y0;
    run.slow.times.push_back(0);
    run.slow.states.col(0) = x;
    for (std::size_t n = 0; n < steps; ++n) {
        if (sched.restart == RestartPolicy::Cold) y = y0;
        RngStream micro_rng = rng.child(StreamRole::Micro, n);
        const Vector<Scalar> drift = detail::micro_average(system, x, y, sched, micro_rng, n, [](long, const auto&) {});
        x = em_step(x, drift, sched.macro_dt, run.noise_log.col(static_cast<Eigen::Index>(n)), system.sigma1, n);
        if (!within_reject_threshold(x)) throw OverflowError("run_pim: slow state left the finite range", n + 1);
        run.slow.times.push_back(static_cast<Scalar>(n + 1) * sched.macro_dt);
        run.slow.states.col(static_cast<Eigen::Index>(n + 1)) = x;
    }
    run.last_fast = y;
    return run;
}

/// Plain Euler-Maruyama of dX = g(X) dt + sigma1 dL on the macro grid,
/// consuming the given increments.
template <typename Scalar, typename Drift>
Trajectory<Scalar> run_slow_em(Drift&& g, const Vector<Scalar>& x0, Scalar sigma1, const PimSchedule<Scalar>& sched,
                               const Matrix<Scalar>& noise_log) {
    const std::size_t steps = sched.macro_steps();
    if (static_cast<std::size_t>(noise_log.cols()) < steps || noise_log.rows() != x0.size()) {
        throw ParameterError("run_slow_em: noise log too short or of wrong dimension");
    }
    Trajectory<Scalar> traj(static_cast<int>(x0.size()), steps + 1);
    traj.meta.scheme = "slow-em";
    Vector<Scalar> x = x0;
    traj.times.push_back(0);
    traj.states.col(0) = x;
    for (std::size_t n = 0; n < steps; ++n) {
        const Vector<Scalar> drift = g(x, n);
        x = em_step(x, drift, sched.macro_dt, noise_log.col(static_cast<Eigen::Index>(n)), sigma1, n);
        if (!within_reject_threshold(x)) throw OverflowError("slow Euler-Maruyama: state left the finite range", n + 1);
        traj.times.push_back(static_cast<Scalar>(n + 1) * sched.macro_dt);
        traj.states.col(static_cast<Eigen::Index>(n + 1)) = x;
    }
    return traj;
}

}  // namespace levyms

#endif  // LEVYMS_PIM_HPP

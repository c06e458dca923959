#ifndef LEVYMS_SDE_HPP
#define LEVYMS_SDE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "levyms/errors.hpp"
#include "levyms/rng.hpp"
#include "levyms/stable.hpp"
#include "levyms/system.hpp"

namespace levyms {

/// Paths whose state magnitude exceeds this are rejected.
inline constexpr double kRejectThreshold = 1e12;

template <typename Derived>
bool within_reject_threshold(const Eigen::MatrixBase<Derived>& v) {
    return v.allFinite() && v.cwiseAbs().maxCoeff() <= kRejectThreshold;
}

/// One Euler-Maruyama step: state + drift * dt + sigma * increment.
template <typename DerivedState, typename DerivedDrift, typename DerivedNoise>
Vector<typename DerivedState::Scalar> em_step(const Eigen::MatrixBase<DerivedState>& state,
                                               const Eigen::MatrixBase<DerivedDrift>& drift_value,
                                               typename DerivedState::Scalar dt,
                                               const Eigen::MatrixBase<DerivedNoise>& noise_increment,
                                               typename DerivedState::Scalar sigma,
                                               std::size_t step_index = 0) {
    if (state.size() != drift_value.size() || state.size() != noise_increment.size()) {
        throw ParameterError("em_step: dimension mismatch (state " + std::to_string(state.size()) + ", drift " +
                             std::to_string(drift_value.size()) + ", noise " +
                             std::to_string(noise_increment.size()) + ")");
    }
    if (!(dt > 0)) throw ParameterError("em_step: dt must be > 0");
    Vector<typename DerivedState::Scalar> next = state + drift_value * dt + sigma * noise_increment;
    if (!next.allFinite()) throw OverflowError("em_step: non-finite state", step_index);
    return next;
}

template <typename Scalar = double>
struct FullRun {
    Trajectory<Scalar> slow;
    Trajectory<Scalar> fast;
    Matrix<Scalar> slow_noise;  // column k: unscaled slow increment consumed by step k
    bool under_resolved = false;  // dt > epsilon / 10
};

/// Direct Euler-Maruyama on the coupled pair; the fast update uses
/// f2/eps * dt and (sigma2 / eps^{1/alpha2}) * dL2. Slow and fast noise come
/// from disjoint children of `rng`. States are stored every `thin` steps
/// (the final point is always stored when it lies on the thinned grid).
template <typename Scalar>
FullRun<Scalar> simulate_full(const SlowFastSystem<Scalar>& system, const Vector<Scalar>& x0, const Vector<Scalar>& y0,
                              Scalar dt, Scalar horizon, const RngStream& rng, std::size_t thin = 1) {
    system.validate();
    if (x0.size() != system.dim_slow || y0.size() != system.dim_fast) {
        throw ParameterError("simulate_full: initial state dimension mismatch");
    }
    if (!(dt > 0) || !(horizon >= dt)) throw ParameterError("simulate_full: need dt > 0 and horizon >= dt");
    if (thin < 1) throw ParameterError("simulate_full: thin must be >= 1");

    const std::size_t steps = whole_steps(horizon, dt);
    const std::size_t stored = steps / thin + 1;

    FullRun<Scalar> run;
    run.under_resolved = dt > system.epsilon / 10;
    run.slow = Trajectory<Scalar>(system.dim_slow, stored);
    run.fast = Trajectory<Scalar>(system.dim_fast, stored);
    run.slow_noise.resize(system.dim_slow, static_cast<Eigen::Index>(steps));
    run.slow.meta = {rng.master_seed(), "full-em", system.name};
    run.fast.meta = run.slow.meta;

    RngStream slow_rng = rng.child(StreamRole::Slow);
    RngStream fast_rng = rng.child(StreamRole::Fast);
    const IncrementSampler<Scalar> slow_noise(system.noise1, dt);
    const IncrementSampler<Scalar> fast_noise(system.noise2, dt);
    const Scalar fast_drift_scale = dt / system.epsilon;
    const Scalar fast_sigma = system.sigma2 / std::pow(system.epsilon, Scalar(1) / system.noise2.alpha);

    Vector<Scalar> x = x0;
    Vector<Scalar> y = y0;
    Vector<Scalar> dx(system.dim_slow), dy(system.dim_fast);
    Vector<Scalar> dl1(system.dim_slow), dl2(system.dim_fast);

    std::size_t col = 0;
    run.slow.times.push_back(0);
    run.fast.times.push_back(0);
    run.slow.states.col(0) = x;
    run.fast.states.col(0) = y;
    for (std::size_t k = 0; k < steps; ++k) {
        system.f1(x, y, dx);
        system.f2(x, y, dy);
        slow_noise.fill(slow_rng, dl1);
        fast_noise.fill(fast_rng, dl2);
        run.slow_noise.col(static_cast<Eigen::Index>(k)) = dl1;
        x += dx * dt + system.sigma1 * dl1;
        y += dy * fast_drift_scale + fast_sigma * dl2;
        if (!within_reject_threshold(x) || !within_reject_threshold(y)) {
            throw OverflowError("simulate_full: state left the finite range", k + 1);
        }
        if ((k + 1) % thin == 0) {
            ++col;
            const Scalar t = static_cast<Scalar>(k + 1) * dt;
            run.slow.times.push_back(t);
            run.fast.times.push_back(t);
            run.slow.states.col(static_cast<Eigen::Index>(col)) = x;
            run.fast.states.col(static_cast<Eigen::Index>(col)) = y;
        }
    }
    return run;
}

struct ContractionProbe {
    bool holds = true;
    double worst_ratio = -INFINITY;  // max of <df, dy> / |dy|^2 over trials
};

/// Random spot-check of <f2(x,y1) - f2(x,y2), y1 - y2> <= -beta |y1 - y2|^2
/// on the box [-box, box]^{n+2m}.
template <typename Scalar>
ContractionProbe probe_contraction(const SlowFastSystem<Scalar>& system, int trials, RngStream rng,
                                   Scalar box = Scalar(10)) {
    if (trials < 1) throw ParameterError("probe_contraction: trials must be >= 1");
    ContractionProbe probe;
    Vector<Scalar> x(system.dim_slow), y1(system.dim_fast), y2(system.dim_fast);
    Vector<Scalar> f_a(system.dim_fast), f_b(system.dim_fast);
    auto draw = [&](Vector<Scalar>& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = box * static_cast<Scalar>(2 * rng.uniform() - 1);
    };
    for (int t = 0; t < trials; ++t) {
        draw(x);
        draw(y1);
        draw(y2);
        const Vector<Scalar> dy = y1 - y2;
        const Scalar norm2 = dy.squaredNorm();
        if (norm2 == 0) continue;
        system.f2(x, y1, f_a);
        system.f2(x, y2, f_b);
        const Scalar inner = (f_a - f_b).dot(dy);
        probe.worst_ratio = std::max(probe.worst_ratio, static_cast<double>(inner / norm2));
        if (!(inner <= -system.beta * norm2 + Scalar(1e-10))) probe.holds = false;
    }
    return probe;
}

}  // namespace levyms

#endif  // LEVYMS_SDE_HPP

#ifndef LEVYMS_SYSTEM_HPP
#define LEVYMS_SYSTEM_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "levyms/errors.hpp"
#include "levyms/stable.hpp"

namespace levyms {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Drift callback: writes the drift at (x, y) into `out` (pre-sized).
template <typename Scalar>
using DriftFn = std::function<void(const Vector<Scalar>& x, const Vector<Scalar>& y, Vector<Scalar>& out)>;

/// dX = f1(X, Y) dt + sigma1 dL1,  dY = f2(X, Y)/eps dt + sigma2/eps^{1/alpha2} dL2.
template <typename Scalar = double>
struct SlowFastSystem {
    std::string name;
    DriftFn<Scalar> f1;
    DriftFn<Scalar> f2;
    Scalar sigma1 = 1;
    Scalar sigma2 = 1;
    Scalar epsilon = Scalar(0.1);
    StableSpec<Scalar> noise1{};
    StableSpec<Scalar> noise2{};
    int dim_slow = 1;
    int dim_fast = 1;
    Scalar beta = 1;  // declared one-sided contraction constant of f2 in y

    void validate() const {
        if (!f1 || !f2) throw ParameterError("system '" + name + "': drifts must be set");
        if (!(epsilon > 0) || !std::isfinite(epsilon)) throw ParameterError("epsilon must be finite and > 0");
        if (!(sigma1 >= 0) || !(sigma2 >= 0) || !std::isfinite(sigma1) || !std::isfinite(sigma2)) {
            throw ParameterError("sigma1 and sigma2 must be finite and >= 0");
        }
        if (dim_slow < 1 || dim_fast < 1) throw ParameterError("dimensions must be positive");
        if (!(beta > 0)) throw ParameterError("declared beta must be > 0");
        noise1.validate();
        noise2.validate();
    }

    Vector<Scalar> slow_drift(const Vector<Scalar>& x, const Vector<Scalar>& y) const {
        Vector<Scalar> out(dim_slow);
        f1(x, y, out);
        return out;
    }

    Vector<Scalar> fast_drift(const Vector<Scalar>& x, const Vector<Scalar>& y) const {
        Vector<Scalar> out(dim_fast);
        f2(x, y, out);
        return out;
    }
};

/// Parameters that can be attached to a built-in drift pair.
template <typename Scalar = double>
struct SystemParams {
    Scalar alpha1 = Scalar(1.5);
    Scalar alpha2 = Scalar(1.5);
    Scalar sigma1 = 1;
    Scalar sigma2 = 1;
    Scalar epsilon = Scalar(0.1);
};

/// Named catalog of built-in drift pairs (all scalar slow and fast state).
///
///   paper_example   f1 = -x + sin(x) exp(-y^2),  f2 = -y,        beta = 1
///   linear          f1 = -x,                     f2 = -y,        beta = 1
///   cubic_fast      f1 = -x + sin(x) exp(-y^2),  f2 = -y^3 - y,  beta = 1
///   expanding_fast  f1 = -x,                     f2 = +y,        beta = 1 (violates contraction)
template <typename Scalar = double>
class DriftRegistry {
public:
    static std::vector<std::string> names() { return {"paper_example", "linear", "cubic_fast", "expanding_fast"}; }

    static bool contains(const std::string& name) {
        for (const auto& n : names()) {
            if (n == name) return true;
        }
        return false;
    }

    static SlowFastSystem<Scalar> make(const std::string& name, const SystemParams<Scalar>& params = {}) {
        SlowFastSystem<Scalar> sys;
        sys.name = name;
        sys.sigma1 = params.sigma1;
        sys.sigma2 = params.sigma2;
        sys.epsilon = params.epsilon;
        sys.noise1 = {params.alpha1, Scalar(1)};
        sys.noise2 = {params.alpha2, Scalar(1)};
        sys.beta = 1;

        const DriftFn<Scalar> averaged_sine = [](const Vector<Scalar>& x, const Vector<Scalar>& y, Vector<Scalar>& out) {
            out(0) = -x(0) + std::sin(x(0)) * std::exp(-y(0) * y(0));
        };
        const DriftFn<Scalar> linear_slow = [](const Vector<Scalar>& x, const Vector<Scalar>&, Vector<Scalar>& out) {
            out(0) = -x(0);
        };
        const DriftFn<Scalar> linear_fast = [](const Vector<Scalar>&, const Vector<Scalar>& y, Vector<Scalar>& out) {
            out(0) = -y(0);
        };

        if (name == "paper_example") {
            sys.f1 = averaged_sine;
            sys.f2 = linear_fast;
        } else if (name == "linear") {
            sys.f1 = linear_slow;
            sys.f2 = linear_fast;
        } else if (name == "cubic_fast") {
            sys.f1 = averaged_sine;
            sys.f2 = [](const Vector<Scalar>&, const Vector<Scalar>& y, Vector<Scalar>& out) {
                out(0) = -y(0) * y(0) * y(0) - y(0);
            };
        } else if (name == "expanding_fast") {
            sys.f1 = linear_slow;
            sys.f2 = [](const Vector<Scalar>&, const Vector<Scalar>& y, Vector<Scalar>& out) { out(0) = y(0); };
        } else {
            throw ParameterError("unknown system '" + name + "'");
        }
        sys.validate();
        return sys;
    }
};

/// Sampled path on a strictly increasing grid starting at 0. Column k of
/// `states` is the state at `times[k]`.
template <typename Scalar = double>
struct Trajectory {
    struct Meta {
        std::uint64_t seed = 0;
        std::string scheme;
        std::string parameters;
    };

    std::vector<Scalar> times;
    Matrix<Scalar> states;
    Meta meta;

    Trajectory() = default;
    Trajectory(int dim, std::size_t points) : states(dim, static_cast<Eigen::Index>(points)) {
        times.reserve(points);
    }

    std::size_t size() const { return times.size(); }
    int dim() const { return static_cast<int>(states.rows()); }

    auto state(std::size_t k) const { return states.col(static_cast<Eigen::Index>(k)); }

    void validate() const {
        if (times.empty() || times.front() != 0) throw ParameterError("trajectory grid must start at t = 0");
        if (static_cast<Eigen::Index>(times.size()) != states.cols()) {
            throw ParameterError("trajectory has mismatched times and states");
        }
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (!(times[k] > times[k - 1])) throw ParameterError("trajectory times must be strictly increasing");
        }
    }
};

/// Number of whole steps of size dt in [0, horizon], tolerant to the
/// representation error of quotients like 1 / 0.001.
template <typename Scalar>
std::size_t whole_steps(Scalar horizon, Scalar dt) {
    const double ratio = static_cast<double>(horizon) / static_cast<double>(dt);
    return static_cast<std::size_t>(std::floor(ratio + 1e-9));
}

}  // namespace levyms

#endif  // LEVYMS_SYSTEM_HPP

#ifndef LEVYMS_STABLE_HPP
#define LEVYMS_STABLE_HPP

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "levyms/errors.hpp"
#include "levyms/quadrature.hpp"
#include "levyms/rng.hpp"

namespace levyms {

/// One symmetric alpha-stable noise source with characteristic function
/// E exp(iuX) = exp(-|scale * u|^alpha).
template <typename Scalar = double>
struct StableSpec {
    Scalar alpha = Scalar(1.5);
    Scalar scale = Scalar(1);

    void validate() const {
        if (!(alpha > 0 && alpha <= 2)) {
            throw ParameterError("stable alpha must lie in (0, 2], got " + std::to_string(static_cast<double>(alpha)));
        }
        if (!(scale >= 0) || !std::isfinite(scale)) {
            throw ParameterError("stable scale must be finite and >= 0");
        }
    }
};

namespace detail {
template <typename Scalar>
inline bool is_cauchy(Scalar alpha) {
    return std::abs(alpha - Scalar(1)) < Scalar(1e-10);
}

// Symmetric Chambers-Mallows-Stuck draw; alpha assumed valid.
template <typename Scalar>
inline Scalar cms_symmetric(Scalar alpha, RngStream& rng) {
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar angle = pi * (static_cast<Scalar>(rng.uniform()) - Scalar(0.5));
    if (is_cauchy(alpha)) {
        return std::tan(angle);
    }
    const Scalar expo = -std::log(static_cast<Scalar>(rng.uniform_open_low()));
    const Scalar inv_alpha = Scalar(1) / alpha;
    return std::sin(alpha * angle) / std::pow(std::cos(angle), inv_alpha) *
           std::pow(std::cos((Scalar(1) - alpha) * angle) / expo, (Scalar(1) - alpha) * inv_alpha);
}
}  // namespace detail

/// Draws one standard symmetric stable variate, E exp(iuX) = exp(-|u|^alpha).
/// For alpha = 2 this is N(0, 2). `spec.scale` is not applied here.
template <typename Scalar>
Scalar sample_standard_stable(const StableSpec<Scalar>& spec, RngStream& rng) {
    spec.validate();
    return detail::cms_symmetric(spec.alpha, rng);
}

/// Increment of the stable process over a step dt: scale * dt^{1/alpha} * X.
template <typename Scalar>
Scalar stable_increment(const StableSpec<Scalar>& spec, Scalar dt, RngStream& rng) {
    if (!(dt > 0) || !std::isfinite(dt)) {
        throw ParameterError("stable_increment: dt must be finite and > 0");
    }
    spec.validate();
    return spec.scale * std::pow(dt, Scalar(1) / spec.alpha) * detail::cms_symmetric(spec.alpha, rng);
}

/// Fills `out` with independent per-coordinate increments over dt.
/// dt == 0 yields an exact zero vector without touching the stream.
template <typename Scalar, typename Derived>
void fill_stable_increments(const StableSpec<Scalar>& spec, Scalar dt, RngStream& rng,
                            Eigen::MatrixBase<Derived> const& out_) {
    auto& out = const_cast<Eigen::MatrixBase<Derived>&>(out_);
    if (dt == 0) {
        out.setZero();
        return;
    }
    if (!(dt > 0) || !std::isfinite(dt)) {
        throw ParameterError("fill_stable_increments: dt must be finite and >= 0");
    }
    spec.validate();
    const Scalar factor = spec.scale * std::pow(dt, Scalar(1) / spec.alpha);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out(i) = factor * detail::cms_symmetric(spec.alpha, rng);
    }
}

/// Pre-validated sampler for hot loops: fixes (alpha, scale, dt) once.
template <typename Scalar = double>
class IncrementSampler {
public:
    IncrementSampler(const StableSpec<Scalar>& spec, Scalar dt) : alpha_(spec.alpha) {
        spec.validate();
        if (!(dt >= 0) || !std::isfinite(dt)) {
            throw ParameterError("IncrementSampler: dt must be finite and >= 0");
        }
        factor_ = dt == 0 ? Scalar(0) : spec.scale * std::pow(dt, Scalar(1) / spec.alpha);
    }

    Scalar operator()(RngStream& rng) const {
        return factor_ == 0 ? Scalar(0) : factor_ * detail::cms_symmetric(alpha_, rng);
    }

    template <typename Derived>
    void fill(RngStream& rng, Eigen::MatrixBase<Derived>& out) const {
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = (*this)(rng);
    }

    Scalar factor() const { return factor_; }

private:
    Scalar alpha_;
    Scalar factor_ = 0;
};

/// Density of the symmetric stable law with characteristic function
/// exp(-|scale * xi|^alpha / weight_exponent), by Fourier inversion:
///
///   rho(x) = (1/pi) * int_0^Xi cos(x xi) exp(-(scale xi)^alpha / w) d xi,
///
/// with Xi chosen so the discarded tail factor is below 1e-12. With w = alpha
/// this is the invariant density of dY = -Y dt + dL^alpha.
template <typename Scalar>
Scalar stable_density(const StableSpec<Scalar>& spec, Scalar x, Scalar weight_exponent,
                      const QuadratureConfig& config = {}) {
    spec.validate();
    if (!(spec.scale > 0)) throw ParameterError("stable_density: scale must be > 0");
    if (!(weight_exponent > 0) || !std::isfinite(weight_exponent) || !std::isfinite(x)) {
        throw ParameterError("stable_density: need finite x and weight_exponent > 0");
    }
    const double alpha = static_cast<double>(spec.alpha);
    const double scale = static_cast<double>(spec.scale);
    const double w = static_cast<double>(weight_exponent);
    const double xd = static_cast<double>(x);
    const double cutoff = std::pow(12.0 * std::numbers::ln10 * w, 1.0 / alpha) / scale;
    auto integrand = [&](double xi) { return std::cos(xd * xi) * std::exp(-std::pow(scale * xi, alpha) / w); };
    const double value = integrate_simpson<double>(integrand, 0.0, cutoff, config).value / std::numbers::pi;
    if (value < -1e-10) {
        throw NumericalError("stable_density: quadrature produced a negative density", value, 0.0);
    }
    return static_cast<Scalar>(value < 0 ? 0.0 : value);
}

}  // namespace levyms

#endif  // LEVYMS_STABLE_HPP

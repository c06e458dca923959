#ifndef LEVYMS_QUADRATURE_HPP
#define LEVYMS_QUADRATURE_HPP

#include <cmath>
#include <cstddef>

#include "levyms/errors.hpp"

namespace levyms {

struct QuadratureConfig {
    double tolerance = 1e-11;       // absolute agreement between successive refinements
    std::size_t initial_intervals = 64;
    int max_doublings = 22;
};

struct QuadratureResult {
    double value;
    double previous;  // estimate at half the resolution
    std::size_t intervals;
};

/// Composite Simpson on [a, b] built as the Richardson extrapolation of
/// nested trapezoid sums. The interval count doubles until two successive
/// Simpson estimates agree within `config.tolerance`; function values are
/// reused across refinements.
template <typename Scalar = double, typename F>
QuadratureResult integrate_simpson(F&& f, Scalar a, Scalar b, const QuadratureConfig& config = {}) {
    if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ParameterError("integrate_simpson: need finite a < b");
    }
    if (config.initial_intervals < 2) {
        throw ParameterError("integrate_simpson: initial_intervals must be >= 2");
    }

    std::size_t n = config.initial_intervals;
    Scalar h = (b - a) / static_cast<Scalar>(n);
    Scalar edge = (f(a) + f(b)) / 2;
    Scalar interior = 0;
    for (std::size_t i = 1; i < n; ++i) interior += f(a + static_cast<Scalar>(i) * h);
    Scalar trapezoid = h * (edge + interior);

    Scalar simpson_prev = trapezoid;
    Scalar simpson_older = trapezoid;
    bool have_simpson = false;
    for (int level = 0; level <= config.max_doublings; ++level) {
        Scalar midpoints = 0;
        for (std::size_t i = 0; i < n; ++i) midpoints += f(a + (static_cast<Scalar>(i) + Scalar(0.5)) * h);
        interior += midpoints;
        n *= 2;
        h /= 2;
        const Scalar refined = h * (edge + interior);
        const Scalar simpson = (4 * refined - trapezoid) / 3;
        trapezoid = refined;
        if (have_simpson && std::abs(simpson - simpson_prev) <= config.tolerance) {
            return {static_cast<double>(simpson), static_cast<double>(simpson_prev), n};
        }
        simpson_older = simpson_prev;
        simpson_prev = simpson;
        have_simpson = true;
    }
    throw NumericalError("integrate_simpson: refinement did not converge", static_cast<double>(simpson_prev),
                         static_cast<double>(simpson_older));
}

}  // namespace levyms

#endif  // LEVYMS_QUADRATURE_HPP

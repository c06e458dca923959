#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "levyms/io.hpp"

namespace levyms {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    void pad() {
        if (!(hi > lo)) {
            const double w = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= w;
            hi += w;
        }
    }
};

// Roughly five round-numbered ticks covering the range.
std::vector<double> ticks(const Range& r) {
    const double raw = (r.hi - r.lo) / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(r.lo / step) * step; t <= r.hi + step * 1e-9; t += step) {
        out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    }
    return out;
}

}  // namespace

std::string render_svg_plot(const std::vector<PlotSeries>& series, const PlotStyle& style) {
    if (series.empty()) throw ParameterError("svg plot: no series");
    Range xr, yr;
    for (const auto& s : series) {
        if (s.xs.empty() || s.xs.size() != s.ys.size()) {
            throw ParameterError("svg plot: series '" + s.name + "' is empty or has mismatched lengths");
        }
        for (double x : s.xs) xr.include(x);
        for (double y : s.ys) yr.include(y);
    }
    if (!std::isfinite(xr.lo) || !std::isfinite(yr.lo)) throw ParameterError("svg plot: no finite points");
    if (style.fit_slope) {
        yr.include(style.fit_intercept + *style.fit_slope * xr.lo);
        yr.include(style.fit_intercept + *style.fit_slope * xr.hi);
    }
    xr.pad();
    yr.pad();

    const double left = 70, right = 20, top = 40, bottom = 55;
    const double pw = style.width - left - right;
    const double ph = style.height - top - bottom;
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::ostringstream svg;
    svg << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)",
                       style.width, style.height, style.width, style.height)
        << '\n';
    svg << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
    svg << fmt::format(R"(<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>)",
                       style.width / 2, escape(style.title))
        << '\n';
    svg << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", left, top, pw, ph)
        << '\n';

    for (double t : ticks(xr)) {
        svg << fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="#ddd"/>)", px(t), top,
                           top + ph)
            << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.4g}</text>)",
                           px(t), top + ph + 16, t)
            << '\n';
    }
    for (double t : ticks(yr)) {
        svg << fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{2:.2f}" y2="{1:.2f}" stroke="#ddd"/>)", left, py(t),
                           left + pw)
            << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{:.4g}</text>)",
                           left - 6, py(t) + 4, t)
            << '\n';
    }
    svg << fmt::format(R"(<text x="{:.2f}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>)",
                       left + pw / 2, style.height - 14, escape(style.x_label))
        << '\n';
    svg << fmt::format(
               R"svg(<text x="18" y="{0:.2f}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {0:.2f})">{1}</text>)svg",
               top + ph / 2, escape(style.y_label))
        << '\n';

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        std::string points;
        for (std::size_t k = 0; k < series[s].xs.size(); ++k) {
            if (!std::isfinite(series[s].xs[k]) || !std::isfinite(series[s].ys[k])) continue;
            points += fmt::format("{:.2f},{:.2f} ", px(series[s].xs[k]), py(series[s].ys[k]));
        }
        svg << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)", color, points) << '\n';
        if (series[s].xs.size() <= 30) {
            for (std::size_t k = 0; k < series[s].xs.size(); ++k) {
                if (!std::isfinite(series[s].ys[k])) continue;
                svg << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"/>)", px(series[s].xs[k]),
                                   py(series[s].ys[k]), color)
                    << '\n';
            }
        }
        svg << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/>)", left + 12,
                           top + 16 + 18 * s, left + 32, color)
            << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>)", left + 38,
                           top + 20 + 18 * s, escape(series[s].name))
            << '\n';
    }

    if (style.fit_slope) {
        const double y0 = style.fit_intercept + *style.fit_slope * xr.lo;
        const double y1 = style.fit_intercept + *style.fit_slope * xr.hi;
        svg << fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="gray" stroke-dasharray="6 4"/>)",
                           px(xr.lo), py(y0), px(xr.hi), py(y1))
            << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="end" font-family="sans-serif" font-size="12">fit slope {:.3f}</text>)",
                           left + pw - 8, top + ph - 10, *style.fit_slope)
            << '\n';
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_svg_plot(const std::vector<PlotSeries>& series, const PlotStyle& style, const std::filesystem::path& destination) {
    const std::string text = render_svg_plot(series, style);
    if (destination.has_parent_path()) std::filesystem::create_directories(destination.parent_path());
    std::ofstream out(destination, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + destination.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + destination.string());
}

}  // namespace levyms

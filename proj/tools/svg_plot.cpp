#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "table_io.hpp"

namespace cvcov::cli {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    return format_number(std::round(v * 100.0) / 100.0);
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void pad() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

std::vector<double> linear_ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) {
            break;
        }
    }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
        ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return ticks;
}

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& options) {
    Range xr, yr;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (options.log_x && !(s.x[i] > 0.0)) {
                continue;
            }
            xr.add(options.log_x ? std::log10(s.x[i]) : s.x[i]);
            yr.add(s.y[i]);
        }
    }
    if (options.diagonal) {
        const double lo = std::min(xr.lo, yr.lo), hi = std::max(xr.hi, yr.hi);
        xr.lo = yr.lo = lo;
        xr.hi = yr.hi = hi;
    }
    xr.pad();
    yr.pad();

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) {
        const double v = options.log_x ? std::log10(x) : x;
        return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw;
    };
    auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(options.title) << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    std::vector<double> xticks;
    if (options.log_x) {
        for (double d = std::floor(xr.lo); d <= std::ceil(xr.hi); d += 1.0) {
            for (const double m : {1.0, 2.0, 5.0}) {
                const double v = std::log10(m) + d;
                if (v >= xr.lo && v <= xr.hi) {
                    xticks.push_back(std::pow(10.0, v));
                }
            }
        }
    } else {
        xticks = linear_ticks(xr.lo, xr.hi);
    }
    for (const double t : xticks) {
        const double x = px(t);
        o << "<line x1=\"" << num(x) << "\" y1=\"" << kTop + ph << "\" x2=\"" << num(x)
          << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>";
        o << "<text x=\"" << num(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
          << format_number(std::round(t * 1e4) / 1e4) << "</text>\n";
    }
    for (const double t : linear_ticks(yr.lo, yr.hi)) {
        const double y = py(t);
        o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft
          << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
          << format_number(std::round(t * 1e4) / 1e4) << "</text>\n";
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">" << escape(options.x_label) << "</text>\n";
    o << "<text transform=\"translate(20," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(options.y_label) << "</text>\n";

    if (options.diagonal) {
        const double lo = std::max(xr.lo, yr.lo), hi = std::min(xr.hi, yr.hi);
        o << "<line x1=\"" << num(px(lo)) << "\" y1=\"" << num(py(lo)) << "\" x2=\"" << num(px(hi))
          << "\" y2=\"" << num(py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        const auto& sr = series[s];
        if (options.lines) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i) {
                if (options.log_x && !(sr.x[i] > 0.0)) {
                    continue;
                }
                o << num(px(sr.x[i])) << ',' << num(py(sr.y[i])) << ' ';
            }
            o << "\"/>\n";
        }
        for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i) {
            if (options.log_x && !(sr.x[i] > 0.0)) {
                continue;
            }
            o << "<circle cx=\"" << num(px(sr.x[i])) << "\" cy=\"" << num(py(sr.y[i]))
              << "\" r=\"3\" fill=\"" << color << "\"/>";
        }
        o << '\n';
        const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
        o << "<rect x=\"" << kLeft + pw + 15 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"12\" fill=\""
          << color << "\"/><text x=\"" << kLeft + pw + 33 << "\" y=\"" << ly + 2 << "\">"
          << escape(sr.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace cvcov::cli

#pragma once

#include <string>
#include <vector>

namespace cvcov::cli {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool lines = true;     ///< false draws markers only
    bool diagonal = false; ///< y = x reference line
};

/// Static SVG document with axes, ticks and a legend.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace cvcov::cli

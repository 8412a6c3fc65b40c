#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace dflect {

struct PlotSeries {
    std::string label;
    std::vector<std::array<double, 2>> points;  // (x, y)
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::optional<double> guide_y;  // horizontal dashed reference line
    std::string guide_label;
    bool log_x = false;
};

// Renders a self-contained SVG scatter/line chart. Points with non-finite
// coordinates are skipped. Throws std::invalid_argument when no series
// contains a drawable point; the file is not created in that case.
void write_svg_plot(const std::string& path, const PlotSpec& spec);

}  // namespace dflect

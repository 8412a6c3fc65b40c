#include "dflect/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

#include "dflect/common.hpp"

namespace dflect {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMarginL = 72.0;
constexpr double kMarginR = 24.0;
constexpr double kMarginT = 44.0;
constexpr double kMarginB = 58.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#17becf"};

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string escape_xml(const std::string& s) {
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

// Rounds a span to a 1/2/5 decade multiple so tick steps land on round values.
double nice_step(double span) {
    if (!(span > 0.0)) return 1.0;
    double raw = span / 4.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double frac = raw / mag;
    double step;
    if (frac < 1.5)
        step = 1.0;
    else if (frac < 3.5)
        step = 2.0;
    else if (frac < 7.5)
        step = 5.0;
    else
        step = 10.0;
    return step * mag;
}

struct Mapper {
    bool logx = false;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    double tx(double x) const {
        double v = logx ? std::log10(x) : x;
        double lo = logx ? std::log10(x0) : x0;
        double hi = logx ? std::log10(x1) : x1;
        return kMarginL + (v - lo) / (hi - lo) * (kWidth - kMarginL - kMarginR);
    }
    double ty(double y) const {
        return kHeight - kMarginB -
               (y - y0) / (y1 - y0) * (kHeight - kMarginT - kMarginB);
    }
};

}  // namespace

void write_svg_plot(const std::string& path, const PlotSpec& spec) {
    bool any = false;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (const auto& s : spec.series) {
        for (const auto& p : s.points) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
            if (!any) {
                xmin = xmax = p[0];
                ymin = ymax = p[1];
                any = true;
            } else {
                xmin = std::min(xmin, p[0]);
                xmax = std::max(xmax, p[0]);
                ymin = std::min(ymin, p[1]);
                ymax = std::max(ymax, p[1]);
            }
        }
    }
    if (!any) throw std::invalid_argument("write_svg_plot: no drawable points");
    if (spec.guide_y) {
        ymin = std::min(ymin, *spec.guide_y);
        ymax = std::max(ymax, *spec.guide_y);
    }

    bool logx = spec.log_x && xmin > 0.0;
    if (xmax == xmin) {
        xmax = xmin + (logx ? xmin : 1.0);
        if (logx) xmin *= 0.5;
        else xmin -= 1.0;
    }
    double ypad = (ymax - ymin) * 0.06;
    if (ypad == 0.0) ypad = std::abs(ymax) * 0.1 + 0.5;
    ymin -= ypad;
    ymax += ypad;

    Mapper map;
    map.logx = logx;
    map.x0 = xmin;
    map.x1 = xmax;
    map.y0 = ymin;
    map.y1 = ymax;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           fmt("%.0f", kWidth) + "\" height=\"" + fmt("%.0f", kHeight) +
           "\" viewBox=\"0 0 " + fmt("%.0f", kWidth) + " " +
           fmt("%.0f", kHeight) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", kWidth / 2) +
           "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
           "text-anchor=\"middle\">" +
           escape_xml(spec.title) + "</text>\n";

    // frame
    svg += "<rect x=\"" + fmt("%.1f", kMarginL) + "\" y=\"" +
           fmt("%.1f", kMarginT) + "\" width=\"" +
           fmt("%.1f", kWidth - kMarginL - kMarginR) + "\" height=\"" +
           fmt("%.1f", kHeight - kMarginT - kMarginB) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";

    // x ticks at the distinct data abscissae (ratio sweeps are short lists)
    std::vector<double> xticks;
    for (const auto& s : spec.series)
        for (const auto& p : s.points)
            if (std::isfinite(p[0]) && std::isfinite(p[1])) xticks.push_back(p[0]);
    std::sort(xticks.begin(), xticks.end());
    xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
    if (xticks.size() > 12) {
        std::vector<double> thinned;
        size_t step = (xticks.size() + 11) / 12;
        for (size_t i = 0; i < xticks.size(); i += step) thinned.push_back(xticks[i]);
        xticks.swap(thinned);
    }
    for (double x : xticks) {
        double px = map.tx(x);
        svg += "<line x1=\"" + fmt("%.2f", px) + "\" y1=\"" +
               fmt("%.2f", kHeight - kMarginB) + "\" x2=\"" + fmt("%.2f", px) +
               "\" y2=\"" + fmt("%.2f", kHeight - kMarginB + 5) +
               "\" stroke=\"#444\"/>\n";
        svg += "<text x=\"" + fmt("%.2f", px) + "\" y=\"" +
               fmt("%.2f", kHeight - kMarginB + 18) +
               "\" font-family=\"sans-serif\" font-size=\"11\" "
               "text-anchor=\"middle\">" +
               fmt("%g", x) + "</text>\n";
    }

    // y ticks on a round step
    double step = nice_step(ymax - ymin);
    double ystart = std::ceil(ymin / step) * step;
    for (double y = ystart; y <= ymax + 1e-12 * step; y += step) {
        double py = map.ty(y);
        svg += "<line x1=\"" + fmt("%.2f", kMarginL - 5) + "\" y1=\"" +
               fmt("%.2f", py) + "\" x2=\"" + fmt("%.2f", kMarginL) +
               "\" y2=\"" + fmt("%.2f", py) + "\" stroke=\"#444\"/>\n";
        svg += "<line x1=\"" + fmt("%.2f", kMarginL) + "\" y1=\"" +
               fmt("%.2f", py) + "\" x2=\"" + fmt("%.2f", kWidth - kMarginR) +
               "\" y2=\"" + fmt("%.2f", py) +
               "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
        svg += "<text x=\"" + fmt("%.2f", kMarginL - 9) + "\" y=\"" +
               fmt("%.2f", py + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" "
               "text-anchor=\"end\">" +
               fmt("%g", std::abs(y) < 1e-12 * step ? 0.0 : y) + "</text>\n";
    }

    // axis labels
    svg += "<text x=\"" + fmt("%.1f", (kMarginL + kWidth - kMarginR) / 2) +
           "\" y=\"" + fmt("%.1f", kHeight - 14) +
           "\" font-family=\"sans-serif\" font-size=\"13\" "
           "text-anchor=\"middle\">" +
           escape_xml(spec.x_label) + "</text>\n";
    svg += "<text x=\"20\" y=\"" +
           fmt("%.1f", (kMarginT + kHeight - kMarginB) / 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 20 " +
           fmt("%.1f", (kMarginT + kHeight - kMarginB) / 2) + ")\">" +
           escape_xml(spec.y_label) + "</text>\n";

    // guide line
    if (spec.guide_y) {
        double py = map.ty(*spec.guide_y);
        svg += "<line x1=\"" + fmt("%.2f", kMarginL) + "\" y1=\"" +
               fmt("%.2f", py) + "\" x2=\"" + fmt("%.2f", kWidth - kMarginR) +
               "\" y2=\"" + fmt("%.2f", py) +
               "\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>\n";
        if (!spec.guide_label.empty())
            svg += "<text x=\"" + fmt("%.2f", kWidth - kMarginR - 4) +
                   "\" y=\"" + fmt("%.2f", py - 5) +
                   "\" font-family=\"sans-serif\" font-size=\"11\" "
                   "text-anchor=\"end\" fill=\"#666\">" +
                   escape_xml(spec.guide_label) + "</text>\n";
    }

    // series: polyline through finite points plus a marker per point
    size_t color_idx = 0;
    double legend_y = kMarginT + 16;
    for (const auto& s : spec.series) {
        const char* color = kPalette[color_idx % (sizeof kPalette / sizeof *kPalette)];
        ++color_idx;
        std::string poly;
        std::string markers;
        for (const auto& p : s.points) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
            double px = map.tx(p[0]);
            double py = map.ty(p[1]);
            poly += fmt("%.2f", px) + "," + fmt("%.2f", py) + " ";
            markers += "<circle cx=\"" + fmt("%.2f", px) + "\" cy=\"" +
                       fmt("%.2f", py) + "\" r=\"3.5\" fill=\"" + color +
                       "\"/>\n";
        }
        if (!poly.empty()) {
            svg += "<polyline points=\"" + poly +
                   "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.6\"/>\n";
            svg += markers;
        }
        if (!s.label.empty()) {
            svg += "<line x1=\"" + fmt("%.1f", kWidth - kMarginR - 120) +
                   "\" y1=\"" + fmt("%.1f", legend_y - 4) + "\" x2=\"" +
                   fmt("%.1f", kWidth - kMarginR - 96) + "\" y2=\"" +
                   fmt("%.1f", legend_y - 4) + "\" stroke=\"" + color +
                   "\" stroke-width=\"2\"/>\n";
            svg += "<text x=\"" + fmt("%.1f", kWidth - kMarginR - 90) +
                   "\" y=\"" + fmt("%.1f", legend_y) +
                   "\" font-family=\"sans-serif\" font-size=\"12\">" +
                   escape_xml(s.label) + "</text>\n";
            legend_y += 16;
        }
    }
    svg += "</svg>\n";

    struct Closer {
        void operator()(std::FILE* f) const { std::fclose(f); }
    };
    std::unique_ptr<std::FILE, Closer> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("write_svg_plot: cannot open " + path);
    if (std::fwrite(svg.data(), 1, svg.size(), f.get()) != svg.size())
        throw data_error("write_svg_plot: short write to " + path);
}

}  // namespace dflect

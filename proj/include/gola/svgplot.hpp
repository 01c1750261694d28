#pragma once

// Minimal static SVG line plots: one polyline per series, labeled axes,
// a small legend. No scripting, no external references, nothing interactive.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gola::plot {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y)
};

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

}  // namespace detail

inline std::string line_plot_svg(const std::vector<Series>& series, const std::string& x_label,
                                 const std::string& y_label, int width = 640, int height = 420) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    const int npal = 6;
    const double ml = 62, mr = 18, mt = 18, mb = 46;

    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool any = false;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!any) {
                x_min = x_max = x;
                y_min = y_max = y;
                any = true;
            }
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    auto widen = [](double& lo, double& hi) {
        const double span = hi - lo;
        const double pad = span > 0 ? 0.06 * span : std::max(1e-9, 0.1 * std::abs(hi) + 1e-3);
        lo -= pad;
        hi += pad;
    };
    widen(x_min, x_max);
    widen(y_min, y_max);

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto py = [&](double y) {
        return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
    };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "  <line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(height - mb)
        << "\" x2=\"" << detail::num(width - mr) << "\" y2=\"" << detail::num(height - mb)
        << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << detail::num(ml) << "\" y1=\"" << detail::num(mt) << "\" x2=\""
        << detail::num(ml) << "\" y2=\"" << detail::num(height - mb)
        << "\" stroke=\"black\"/>\n";

    const int ticks = 5;
    for (int t = 0; t < ticks; ++t) {
        const double fx = x_min + (x_max - x_min) * t / (ticks - 1);
        const double fy = y_min + (y_max - y_min) * t / (ticks - 1);
        out << "  <text x=\"" << detail::num(px(fx)) << "\" y=\"" << detail::num(height - mb + 16)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::num(fx) << "</text>\n";
        out << "  <text x=\"" << detail::num(ml - 6) << "\" y=\"" << detail::num(py(fy) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << detail::num(fy) << "</text>\n";
    }
    out << "  <text x=\"" << detail::num((ml + width - mr) / 2) << "\" y=\""
        << detail::num(height - 8) << "\" font-size=\"13\" text-anchor=\"middle\">"
        << detail::escape(x_label) << "</text>\n";
    out << "  <text x=\"14\" y=\"" << detail::num((mt + height - mb) / 2)
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << detail::num((mt + height - mb) / 2) << ")\">" << detail::escape(y_label)
        << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        auto pts = series[si].points;
        std::sort(pts.begin(), pts.end());
        out << "  <polyline fill=\"none\" stroke=\"" << palette[si % npal]
            << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i) out << " ";
            out << detail::num(px(pts[i].first)) << "," << detail::num(py(pts[i].second));
        }
        out << "\"/>\n";
        for (const auto& [x, y] : pts)
            out << "  <circle cx=\"" << detail::num(px(x)) << "\" cy=\"" << detail::num(py(y))
                << "\" r=\"3\" fill=\"" << palette[si % npal] << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(si);
        out << "  <rect x=\"" << detail::num(width - mr - 130) << "\" y=\""
            << detail::num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
            << palette[si % npal] << "\"/>\n";
        out << "  <text x=\"" << detail::num(width - mr - 116) << "\" y=\"" << detail::num(ly)
            << "\" font-size=\"12\">" << detail::escape(series[si].label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace gola::plot

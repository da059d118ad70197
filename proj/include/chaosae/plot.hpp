#pragma once

// Minimal standalone SVG line plots.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "chaosae/csv.hpp"

namespace chaosae::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f3a93";
    bool dashed = false;
};

struct Options {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 420;
};

namespace detail {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace detail

inline std::string render_svg(const std::vector<Series>& series, const Options& opt) {
    auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.log_x || x > 0) && (!opt.log_y || y > 0);
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!ok(s.x[i], s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;
    auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(opt.title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double gx = left + pw * k / 4.0, gy = top + ph - ph * k / 4.0;
        os << "<text x=\"" << gx << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
           << (opt.log_x ? "1e" + detail::num(fx) : detail::num(fx)) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << (opt.log_y ? "1e" + detail::num(fy) : detail::num(fy)) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
       << detail::escape(opt.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
       << top + ph / 2 << ")\">" << detail::escape(opt.y_label) << "</text>\n";
    int legend_y = static_cast<int>(top) + 16;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
           << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
            if (ok(s.x[i], s.y[i])) os << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i])) << ' ';
        os << "\"/>\n";
        if (!s.label.empty()) {
            os << "<text x=\"" << left + pw - 8 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" font-size=\"12\" fill=\""
               << s.color << "\">" << detail::escape(s.label) << "</text>\n";
            legend_y += 16;
        }
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::string& path, const std::vector<Series>& series, const Options& opt) {
    auto os = csv::open_out(path);
    os << render_svg(series, opt);
    if (!os) throw IoError("write failed for '" + path + "'");
}

} // namespace chaosae::plot

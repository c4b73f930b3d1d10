#include "fuzzformer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "fuzzformer/error.hpp"

namespace fuzzformer::svg {

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string tick_label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(x) < 1e-12 ? 0.0 : x);
    return buf;
}

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

double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) {
            const double pad = std::max(std::abs(lo) * 0.05, 0.5);
            lo -= pad;
            hi += pad;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

}  // namespace

std::string color(std::size_t index) {
    static const char* const palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[index % 10];
}

std::string render(const Plot& plot, int width, int height) {
    const double left = 70, right = 150, top = 40, bottom = 50;
    double pw = width - left - right;
    double ph = height - top - bottom;
    Range xr, yr;
    for (const auto& s : plot.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr.finish();
    yr.finish();
    if (plot.equal_aspect) {
        const double per_px = std::max((xr.hi - xr.lo) / pw, (yr.hi - yr.lo) / ph);
        const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
        xr.lo = cx - 0.5 * per_px * pw, xr.hi = cx + 0.5 * per_px * pw;
        yr.lo = cy - 0.5 * per_px * ph, yr.hi = cy + 0.5 * per_px * ph;
    }
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(plot.title) + "</text>\n";
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";

    const double xs = nice_step(xr.hi - xr.lo, 6), ys = nice_step(yr.hi - yr.lo, 5);
    for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi; t += xs) {
        out += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
               num(top) + "\" stroke=\"#eee\"/>\n";
        out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 15) + "\" text-anchor=\"middle\">" +
               tick_label(t) + "</text>\n";
    }
    for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi; t += ys) {
        out += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
               num(py(t)) + "\" stroke=\"#eee\"/>\n";
        out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
               tick_label(t) + "</text>\n";
    }
    out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 12.0) + "\" text-anchor=\"middle\">" +
           escape(plot.x_label) + "</text>\n";
    out += "<text transform=\"translate(16," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(plot.y_label) + "</text>\n";

    std::size_t legend = 0;
    for (const auto& s : plot.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.scatter) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"" +
                       num(2.0 * s.width) + "\" fill=\"" + s.color + "\"/>\n";
            }
        } else if (n > 0) {
            out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" + num(s.width) + "\"" +
                   (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"";
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                out += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
            }
            out += "\"/>\n";
        }
        if (!s.label.empty()) {
            const double ly = top + 10 + 16.0 * static_cast<double>(legend++);
            const double lx = left + pw + 12;
            out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 18) + "\" y2=\"" + num(ly) +
                   "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
                   (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
            out += "<text x=\"" + num(lx + 24) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

std::string heatmap(const std::string& title, const std::string& x_label, const std::string& y_label,
                    std::size_t rows, std::size_t cols, const std::vector<double>& values, int size) {
    if (values.size() != rows * cols) throw ShapeError("heatmap: value count does not match rows x cols");
    const double margin = 50;
    const double cell_w = (size - 2 * margin) / static_cast<double>(std::max<std::size_t>(cols, 1));
    const double cell_h = (size - 2 * margin) / static_cast<double>(std::max<std::size_t>(rows, 1));
    double hi = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) hi = std::max(hi, v);
    }
    if (hi <= 0.0) hi = 1.0;
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
                      "\" height=\"" + std::to_string(size) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(size / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
           "</text>\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = values[r * cols + c];
            const int shade = std::isfinite(v) ? static_cast<int>(255.0 * (1.0 - std::clamp(v / hi, 0.0, 1.0))) : 255;
            char fill[16];
            std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
            out += "<rect x=\"" + num(margin + c * cell_w) + "\" y=\"" + num(margin + r * cell_h) + "\" width=\"" +
                   num(cell_w + 0.2) + "\" height=\"" + num(cell_h + 0.2) + "\" fill=\"" + fill + "\"/>\n";
        }
    }
    out += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(size - 2 * margin) +
           "\" height=\"" + num(size - 2 * margin) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    out += "<text x=\"" + num(size / 2.0) + "\" y=\"" + num(size - 15.0) + "\" text-anchor=\"middle\">" +
           escape(x_label) + "</text>\n";
    out += "<text transform=\"translate(20," + num(size / 2.0) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(y_label) + "</text>\n";
    out += "</svg>\n";
    return out;
}

Series ellipse(double cx, double cy, double sxx, double sxy, double syy, double scale, std::string label,
               std::string color_value) {
    // Principal axes of the 2x2 covariance.
    const double tr = 0.5 * (sxx + syy);
    const double det_term = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
    const double l1 = std::max(0.0, tr + det_term), l2 = std::max(0.0, tr - det_term);
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    Series s;
    s.label = std::move(label);
    s.color = std::move(color_value);
    const int steps = 72;
    for (int i = 0; i <= steps; ++i) {
        const double t = 2.0 * std::numbers::pi * i / steps;
        const double a = scale * std::sqrt(l1) * std::cos(t), b = scale * std::sqrt(l2) * std::sin(t);
        s.x.push_back(cx + a * std::cos(angle) - b * std::sin(angle));
        s.y.push_back(cy + a * std::sin(angle) + b * std::cos(angle));
    }
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& svg) {
    std::ofstream out(path);
    out << svg;
    if (!out) throw DataError("svg: cannot write " + path.string());
}

}  // namespace fuzzformer::svg

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fuzzformer::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
    double width = 1.5;
    /// Draw markers instead of a connecting line.
    bool scatter = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    /// Same data-per-pixel on both axes (for latent-space pictures).
    bool equal_aspect = false;
};

/// Static line/scatter chart with axes, ticks and a legend.
std::string render(const Plot& plot, int width = 720, int height = 420);

/// Row-major rows x cols grid of values in [0, 1]-ish, drawn dark for large values.
std::string heatmap(const std::string& title, const std::string& x_label, const std::string& y_label,
                    std::size_t rows, std::size_t cols, const std::vector<double>& values, int size = 480);

/// Closed curve at `scale` standard deviations of a 2-D Gaussian.
Series ellipse(double cx, double cy, double sxx, double sxy, double syy, double scale, std::string label,
               std::string color);

/// Categorical palette.
std::string color(std::size_t index);

void write_file(const std::filesystem::path& path, const std::string& svg);

}  // namespace fuzzformer::svg

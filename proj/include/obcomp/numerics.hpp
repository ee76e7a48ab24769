#pragma once

#include <span>
#include <vector>

namespace obc {

/// Row-major dense map on a spatial lattice. The workhorse for attention
/// maps, soft masks, and preview images.
struct Grid2D {
    int h = 0;
    int w = 0;
    std::vector<double> values;  // h*w, row-major

    Grid2D() = default;
    Grid2D(int h_, int w_, double fill = 0.0);

    double& at(int row, int col) { return values[static_cast<size_t>(row) * w + col]; }
    double at(int row, int col) const { return values[static_cast<size_t>(row) * w + col]; }
    size_t size() const { return values.size(); }

    // throws std::invalid_argument on shape/finiteness violations
    void validate() const;
};

// (x - min) / (max - min + eps), output in [0,1]. Empty input throws.
std::vector<double> minmax_normalize(std::span<const double> x, double eps);

// Half-pixel-center bilinear resampling (align_corners=false by default);
// exact passthrough when sizes already match. Preserves constants and
// global min/max bounds.
Grid2D bilinear_upsample(const Grid2D& m, int out_h, int out_w, bool align_corners = false);

// Same-size 3x3 box filter; edge cells average over in-bounds neighbors
// only, so [0,1] inputs stay in [0,1].
Grid2D avg_pool_3x3(const Grid2D& m);

// Linear-interpolation quantile of the sorted values; q=0 -> min, q=1 -> max.
double quantile(std::span<const double> values, double q);

// -sum p_i log p_i in nats, with 0*log0 := 0. Negative entries throw.
double shannon_entropy(std::span<const double> p);

}  // namespace obc

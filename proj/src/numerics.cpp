#include "obcomp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace obc {

Grid2D::Grid2D(int h_, int w_, double fill) : h(h_), w(w_) {
    if (h_ < 1 || w_ < 1) {
        throw std::invalid_argument("Grid2D: dimensions must be positive");
    }
    values.assign(static_cast<size_t>(h_) * w_, fill);
}

void Grid2D::validate() const {
    if (h < 1 || w < 1) {
        throw std::invalid_argument("Grid2D: dimensions must be positive");
    }
    if (values.size() != static_cast<size_t>(h) * w) {
        throw std::invalid_argument("Grid2D: values.size() != h*w");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("Grid2D: non-finite entry");
        }
    }
}

std::vector<double> minmax_normalize(std::span<const double> x, double eps) {
    if (x.empty()) {
        throw std::invalid_argument("minmax_normalize: empty input");
    }
    double lo = x[0], hi = x[0];
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("minmax_normalize: non-finite entry");
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double denom = hi - lo + eps;
    std::vector<double> out(x.size());
    if (denom <= 0.0) {
        // constant input with eps=0: numerator is zero everywhere
        std::fill(out.begin(), out.end(), 0.0);
        return out;
    }
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = std::clamp((x[i] - lo) / denom, 0.0, 1.0);
    }
    return out;
}

namespace {

// source coordinate + interpolation weight for one output index
struct Tap {
    int lo;
    int hi;
    double frac;
};

Tap sample_tap(int out_idx, int in_size, int out_size, bool align_corners) {
    double src;
    if (align_corners) {
        src = out_size > 1
                  ? static_cast<double>(out_idx) * (in_size - 1) / (out_size - 1)
                  : 0.0;
    } else {
        const double scale = static_cast<double>(in_size) / out_size;
        src = (out_idx + 0.5) * scale - 0.5;
    }
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in_size - 1);
    return {lo, hi, src - lo};
}

}  // namespace

Grid2D bilinear_upsample(const Grid2D& m, int out_h, int out_w, bool align_corners) {
    if (m.h < 1 || m.w < 1) {
        throw std::invalid_argument("bilinear_upsample: degenerate input map");
    }
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("bilinear_upsample: target size must be positive");
    }
    if (out_h == m.h && out_w == m.w) {
        return m;
    }

    std::vector<Tap> col_taps(out_w);
    for (int x = 0; x < out_w; ++x) {
        col_taps[x] = sample_tap(x, m.w, out_w, align_corners);
    }

    Grid2D out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const Tap ty = sample_tap(y, m.h, out_h, align_corners);
        for (int x = 0; x < out_w; ++x) {
            const Tap& tx = col_taps[x];
            // lerp form keeps constants bitwise intact
            const double top = m.at(ty.lo, tx.lo) + tx.frac * (m.at(ty.lo, tx.hi) - m.at(ty.lo, tx.lo));
            const double bot = m.at(ty.hi, tx.lo) + tx.frac * (m.at(ty.hi, tx.hi) - m.at(ty.hi, tx.lo));
            out.at(y, x) = top + ty.frac * (bot - top);
        }
    }
    return out;
}

Grid2D avg_pool_3x3(const Grid2D& m) {
    if (m.h < 1 || m.w < 1) {
        throw std::invalid_argument("avg_pool_3x3: degenerate input map");
    }
    Grid2D out(m.h, m.w);
    for (int y = 0; y < m.h; ++y) {
        for (int x = 0; x < m.w; ++x) {
            double sum = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= m.h || xx < 0 || xx >= m.w) continue;
                    sum += m.at(yy, xx);
                    ++count;
                }
            }
            out.at(y, x) = sum / count;
        }
    }
    return out;
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("quantile: empty input");
    }
    if (q < 0.0 || q > 1.0) {
        throw std::invalid_argument("quantile: q outside [0,1]");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * (sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - lo;
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double shannon_entropy(std::span<const double> p) {
    if (p.empty()) {
        throw std::invalid_argument("shannon_entropy: empty distribution");
    }
    double h = 0.0;
    for (double v : p) {
        if (v < 0.0) {
            throw std::invalid_argument("shannon_entropy: negative probability");
        }
        if (v > 0.0) {
            h -= v * std::log(v);
        }
    }
    return std::max(h, 0.0);
}

}  // namespace obc

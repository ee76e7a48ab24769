#include "obcomp/projection.hpp"

#include <stdexcept>

namespace obc {

void ProjectionConfig::validate() const {
    if (lambda_max < 0.0 || lambda_max > 1.0) {
        throw std::invalid_argument("ProjectionConfig: lambda_max outside [0,1]");
    }
    if (!(r_max > 0.0) || r_max > 1.0) {
        throw std::invalid_argument("ProjectionConfig: r_max outside (0,1]");
    }
}

double lambda_schedule(int step_index, const ProjectionConfig& cfg) {
    cfg.validate();
    if (cfg.T < 2) {
        throw std::invalid_argument("lambda_schedule: T must be >= 2");
    }
    if (step_index < 0 || step_index >= cfg.T) {
        throw std::invalid_argument("lambda_schedule: step index out of range");
    }
    const double r = static_cast<double>(step_index) / (cfg.T - 1);
    if (r >= cfg.r_max) return 0.0;
    return cfg.lambda_max * (1.0 - r / cfg.r_max);
}

LatentState background_project(const LatentState& z, const LatentState& z_bg,
                               const SoftMask& mask, double lam) {
    if (z.channels != z_bg.channels || z.h != z_bg.h || z.w != z_bg.w) {
        throw std::invalid_argument("background_project: latent shapes differ");
    }
    if (mask.h != z.h || mask.w != z.w) {
        throw std::invalid_argument("background_project: mask resolution mismatch");
    }
    if (lam < 0.0 || lam > 1.0) {
        throw std::invalid_argument("background_project: lam outside [0,1]");
    }
    if (lam == 0.0) {
        return z;
    }
    LatentState out = z;
    const size_t plane = static_cast<size_t>(z.h) * z.w;
    for (int c = 0; c < z.channels; ++c) {
        const size_t base = static_cast<size_t>(c) * plane;
        for (size_t i = 0; i < plane; ++i) {
            const double m = mask.values[i];
            if (m == 0.0) continue;  // foreground cells stay bitwise untouched
            out.values[base + i] =
                z.values[base + i] + lam * m * (z_bg.values[base + i] - z.values[base + i]);
        }
    }
    return out;
}

}  // namespace obc

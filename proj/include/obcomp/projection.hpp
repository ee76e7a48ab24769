#pragma once

#include "obcomp/diffusion.hpp"
#include "obcomp/dsg.hpp"

namespace obc {

struct ProjectionConfig {
    double lambda_max = 0.10;  // blend strength at step 0
    double r_max = 0.20;       // background-dominance boundary in relative steps
    int T = 30;

    void validate() const;
};

// Piecewise-linear blend weight: lambda_max * (1 - r/r_max) while
// r = step/(T-1) stays below r_max, zero afterwards.
double lambda_schedule(int step_index, const ProjectionConfig& cfg);

// z + lam * (mask (.) (z_bg - z)); the mask broadcasts across channels and
// mask-0 cells pass through bitwise unchanged.
LatentState background_project(const LatentState& z, const LatentState& z_bg,
                               const SoftMask& mask, double lam);

}  // namespace obc

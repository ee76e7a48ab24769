#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "obcomp/decomposer.hpp"
#include "obcomp/diffusion.hpp"
#include "obcomp/dsg.hpp"
#include "obcomp/projection.hpp"
#include "obcomp/pruning.hpp"

namespace obc {

struct RunConfig {
    int steps = 30;      // T
    int paths = 10;      // K
    double cfg_scale = 7.5;
    uint64_t seed = 0;
    ProjectionConfig projection;  // projection.T is kept in sync with steps
    PruneConfig prune;
    GatingConfig gating;
    double mask_tau = 0.50;
    int mask_smooth_iters = 1;
    double mask_eps = 1e-8;
    bool mask_align_corners = false;
    MatchMode match_mode = MatchMode::whole_word;
    ToyGeometry geometry;
    int preview_size = 256;
    int output_size = 256;

    void validate() const;
};

/// One trajectory: seed, current latent, its private background trajectory,
/// score window, and the attention records of the current pruning window.
struct PathState {
    int id = 0;
    uint64_t seed = 0;
    LatentState latent;
    std::vector<LatentState> bg_trajectory;
    ScoreWindow window;
    bool live = true;
    std::vector<AttentionRecord> attention_buffer;
};

struct IntervalRow {
    int step = 0;
    int path_id = 0;
    double tailh = 0.0;
    double align = 0.0;
    double composite = 0.0;
    bool pruned = false;
};

struct PruneEvent {
    int step = 0;
    std::vector<IntervalRow> rows;  // one per path live at this barrier, id order
};

struct RunReport {
    std::vector<PruneEvent> intervals;
    std::vector<int> surviving_path_ids;
    std::vector<uint64_t> surviving_seeds;

    nlohmann::json to_json() const;
};

struct RunResult {
    std::vector<Grid2D> images;       // one per surviving path, id order
    std::vector<int> image_path_ids;
    std::vector<LatentState> final_latents;
    RunReport report;
};

GatingStage stage_of(int step_index, const RunConfig& cfg);

/// Seed K trajectories: initial latent from generator(seed + k) and a
/// pre-generated projection-free background trajectory per path.
std::vector<PathState> init_paths(const RunConfig& cfg, const Decomposition& decomposition,
                                  const Backbone& backbone);

/// The full multi-path loop: per timestep and live path, stage-aware token
/// gating, two backbone calls for CFG, scheduler step, mask refresh, and
/// scheduled background projection; every interval steps the pruning
/// barrier scores previews and discards weak trajectories.
RunResult run_sampling(const RunConfig& cfg, const Decomposition& decomposition,
                       const Backbone& backbone, const AlignmentProvider& provider);

}  // namespace obc

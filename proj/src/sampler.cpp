#include "obcomp/sampler.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

#include "obcomp/rng.hpp"

namespace obc {

void RunConfig::validate() const {
    if (steps < 2) {
        throw std::invalid_argument("RunConfig: steps must be >= 2");
    }
    if (paths < 1) {
        throw std::invalid_argument("RunConfig: paths must be >= 1");
    }
    if (prune.interval < 1) {
        throw std::invalid_argument("RunConfig: pruning interval must be >= 1");
    }
    if (mask_tau < 0.0 || mask_tau > 1.0) {
        throw std::invalid_argument("RunConfig: mask_tau outside [0,1]");
    }
    if (mask_smooth_iters < 0) {
        throw std::invalid_argument("RunConfig: mask_smooth_iters negative");
    }
    if (preview_size < 8 || output_size < 8) {
        throw std::invalid_argument("RunConfig: image sizes must be >= 8");
    }
    projection.validate();
    prune.validate();
    if (gating.gamma_max < 1.0) {
        throw std::invalid_argument("RunConfig: gamma_max must be >= 1");
    }
}

GatingStage stage_of(int step_index, const RunConfig& cfg) {
    if (step_index < 0 || step_index >= cfg.steps) {
        throw std::invalid_argument("stage_of: step index out of range");
    }
    const double r = static_cast<double>(step_index) / (cfg.steps - 1);
    if (r < cfg.gating.r_bg_end) return GatingStage::background;
    if (r < cfg.gating.r_obj_end) return GatingStage::object;
    return GatingStage::free_run;
}

namespace {

std::string full_prompt(const Decomposition& d) {
    if (d.background_sentence.empty()) return d.object_sentence;
    if (d.object_sentence.empty()) return d.background_sentence;
    return d.background_sentence + " " + d.object_sentence;
}

std::vector<std::string> clause_list(const Decomposition& d) {
    std::vector<std::string> clauses;
    if (!d.object_sentence.empty()) clauses.push_back(d.object_sentence);
    if (!d.background_sentence.empty()) clauses.push_back(d.background_sentence);
    return clauses;
}

// complement rule: one empty group borrows the other's mask
SoftMask background_mask(const std::vector<AttentionRecord>& records, const TokenGroups& groups,
                         const RunConfig& cfg, int h, int w) {
    if (groups.bg.empty() && groups.obj.empty()) {
        return SoftMask(h, w, 1.0);  // no anchors at all: correct globally
    }
    if (!groups.bg.empty()) {
        return compute_soft_mask(records, groups.bg, h, w, cfg.mask_eps,
                                 cfg.mask_align_corners)[0];
    }
    const SoftMask obj =
        compute_soft_mask(records, groups.obj, h, w, cfg.mask_eps, cfg.mask_align_corners)[0];
    return complement_mask(obj);
}

}  // namespace

std::vector<PathState> init_paths(const RunConfig& cfg, const Decomposition& decomposition,
                                  const Backbone& backbone) {
    cfg.validate();
    const NoiseSchedule sched = NoiseSchedule::linear_beta(cfg.steps);
    const uint64_t text_seed = sub_seed(cfg.seed, "text");
    const TextEmbedding bg_text = embed_text(decomposition.background_sentence, cfg.geometry.d_text,
                                             cfg.geometry.max_tokens, text_seed);
    const TextEmbedding uncond =
        embed_text("", cfg.geometry.d_text, cfg.geometry.max_tokens, text_seed);

    std::vector<PathState> paths;
    paths.reserve(static_cast<size_t>(cfg.paths));
    for (int k = 0; k < cfg.paths; ++k) {
        PathState p;
        p.id = k;
        p.seed = cfg.seed + static_cast<uint64_t>(k);
        p.latent = gaussian_latent(backbone.latent_channels(), backbone.latent_h(),
                                   backbone.latent_w(), cfg.steps, p.seed);
        p.bg_trajectory = background_trajectory(bg_text, uncond, sub_seed(p.seed, "bg-init"),
                                                cfg.cfg_scale, sched, backbone);
        p.window.min_len = cfg.prune.min_len;
        paths.push_back(std::move(p));
    }
    return paths;
}

RunResult run_sampling(const RunConfig& cfg, const Decomposition& decomposition,
                       const Backbone& backbone, const AlignmentProvider& provider) {
    cfg.validate();
    const int T = cfg.steps;
    const NoiseSchedule sched = NoiseSchedule::linear_beta(T);
    ProjectionConfig proj = cfg.projection;
    proj.T = T;

    const uint64_t text_seed = sub_seed(cfg.seed, "text");
    const TextEmbedding cond = embed_text(full_prompt(decomposition), cfg.geometry.d_text,
                                          cfg.geometry.max_tokens, text_seed);
    const TextEmbedding uncond =
        embed_text("", cfg.geometry.d_text, cfg.geometry.max_tokens, text_seed);
    const std::vector<double> uncond_gains(static_cast<size_t>(uncond.token_count()), 1.0);

    const TokenGroups groups = match_token_groups(cond.tokens, decomposition.object_nouns,
                                                  decomposition.background_nouns, cfg.match_mode);
    const std::vector<std::string> clauses = clause_list(decomposition);

    std::vector<PathState> paths = init_paths(cfg, decomposition, backbone);

    RunResult result;
    for (int i = 0; i < T; ++i) {
        const int t = T - i;
        const GatingStage stage = stage_of(i, cfg);
        const double r = static_cast<double>(i) / (T - 1);
        const std::vector<double> gains =
            token_gain_profile(stage, r, groups, cfg.gating, cond.token_count());

        int failures = 0;
        for (auto& path : paths) {
            if (!path.live) continue;
            try {
                const auto pred_u = backbone.predict(path.latent, t, uncond, uncond_gains);
                const auto pred_c = backbone.predict(path.latent, t, cond, gains);
                const auto eps = cfg_combine(pred_u.eps, pred_c.eps, cfg.cfg_scale);
                path.latent = scheduler_step(path.latent, eps, t, sched);

                for (const auto& rec : pred_c.records) {
                    path.attention_buffer.push_back(rec);
                }

                // masks track this step's records even when nothing consumes them
                const SoftMask soft = background_mask(pred_c.records, groups, cfg,
                                                      path.latent.h, path.latent.w);
                const SoftMask gated = gate_mask(soft, cfg.mask_tau, cfg.mask_smooth_iters);

                if (stage == GatingStage::background) {
                    const double lam = lambda_schedule(i, proj);
                    if (lam > 0.0) {
                        path.latent = background_project(path.latent, path.bg_trajectory[i],
                                                         gated, lam);
                    }
                }
            } catch (const std::exception& e) {
                std::cerr << "error: path " << path.id << " failed at step " << i << ": "
                          << e.what() << "\n";
                path.live = false;
                ++failures;
            }
        }

        const bool any_live = std::any_of(paths.begin(), paths.end(),
                                          [](const PathState& p) { return p.live; });
        if (!any_live) {
            throw std::runtime_error("run_sampling: every path failed at step " +
                                     std::to_string(i));
        }
        (void)failures;

        if (i > 0 && i % cfg.prune.interval == 0) {
            // pruning barrier: score every live path, then apply the quantile rule
            std::vector<PathSignals> signals;
            std::vector<PathState*> scored;
            for (auto& path : paths) {
                if (!path.live) continue;
                bool ok = true;
                double tailh = 0.0, align = 0.0;
                try {
                    const auto mean = window_attention_average(path.attention_buffer);
                    const auto ents = directional_entropies(mean);
                    tailh = tail_entropy(ents.pix2tok, ents.tok2pix, cfg.prune.tail_fraction,
                                         cfg.prune.tail_direction);
                    if (!clauses.empty()) {
                        const Grid2D preview = decode_preview(path.latent, cfg.preview_size);
                        align = alignment_score(preview, clauses, provider);
                    }
                } catch (const std::exception& e) {
                    std::cerr << "warning: path " << path.id << " skipped at pruning step " << i
                              << ": " << e.what() << "\n";
                    ok = false;
                }
                path.attention_buffer.clear();
                if (!ok) continue;  // skipped for this interval, not pruned

                path.window.tailh_history.push_back(tailh);
                path.window.align_history.push_back(align);
                signals.push_back({path.id, tailh, align, path.window.length()});
                scored.push_back(&path);
            }

            PruneEvent event;
            event.step = i;
            if (!signals.empty()) {
                const auto scores = composite_scores(signals, cfg.prune);
                const auto pruned_ids = prune_step(signals, scores, cfg.prune);
                for (size_t s = 0; s < signals.size(); ++s) {
                    IntervalRow row;
                    row.step = i;
                    row.path_id = signals[s].id;
                    row.tailh = signals[s].tailh;
                    row.align = signals[s].align;
                    row.composite = scores[s];
                    row.pruned = std::binary_search(pruned_ids.begin(), pruned_ids.end(),
                                                    signals[s].id);
                    event.rows.push_back(row);
                    if (row.pruned) scored[s]->live = false;
                }
            }
            result.report.intervals.push_back(std::move(event));
        }
    }

    for (const auto& path : paths) {
        if (!path.live) continue;
        result.images.push_back(decode_preview(path.latent, cfg.output_size));
        result.image_path_ids.push_back(path.id);
        result.final_latents.push_back(path.latent);
        result.report.surviving_path_ids.push_back(path.id);
        result.report.surviving_seeds.push_back(path.seed);
    }
    return result;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json j;
    j["intervals"] = nlohmann::json::array();
    for (const auto& event : intervals) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : event.rows) {
            rows.push_back(nlohmann::json{{"step", row.step},
                                          {"path_id", row.path_id},
                                          {"tailh", row.tailh},
                                          {"align", row.align},
                                          {"composite", row.composite},
                                          {"pruned", row.pruned}});
        }
        j["intervals"].push_back(nlohmann::json{{"step", event.step}, {"rows", rows}});
    }
    j["surviving_path_ids"] = surviving_path_ids;
    j["surviving_seeds"] = surviving_seeds;
    return j;
}

}  // namespace obc

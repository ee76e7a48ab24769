#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "obcomp/pruning.hpp"
#include "obcomp/rng.hpp"
#include "obcomp/sampler.hpp"

using namespace obc;

namespace {

Decomposition beach_decomposition() {
    Decomposition d;
    d.background_sentence = "A wide sandy beach stretches under a clear sky with distant waves.";
    d.object_sentence = "A small dog stands in the foreground watching the water.";
    d.object_nouns = {"dog", "foreground", "water"};
    d.background_nouns = {"beach", "sky", "waves", "sand"};
    return d;
}

RunConfig small_config(int T = 12, int K = 3) {
    RunConfig cfg;
    cfg.steps = T;
    cfg.paths = K;
    cfg.prune.interval = 4;
    cfg.seed = 1234;
    cfg.projection.T = T;
    cfg.preview_size = 32;
    cfg.output_size = 32;
    return cfg;
}

// plain guided sampling, written independently of run_sampling
LatentState reference_single_path(const RunConfig& cfg, const Decomposition& d,
                                  const Backbone& backbone, uint64_t path_seed) {
    const NoiseSchedule sched = NoiseSchedule::linear_beta(cfg.steps);
    const uint64_t text_seed = sub_seed(cfg.seed, "text");
    const std::string prompt = d.background_sentence + " " + d.object_sentence;
    const TextEmbedding cond =
        embed_text(prompt, cfg.geometry.d_text, cfg.geometry.max_tokens, text_seed);
    const TextEmbedding uncond =
        embed_text("", cfg.geometry.d_text, cfg.geometry.max_tokens, text_seed);
    const std::vector<double> ones_c(static_cast<size_t>(cond.token_count()), 1.0);
    const std::vector<double> ones_u(static_cast<size_t>(uncond.token_count()), 1.0);

    LatentState z = gaussian_latent(backbone.latent_channels(), backbone.latent_h(),
                                    backbone.latent_w(), cfg.steps, path_seed);
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = cfg.steps - i;
        const auto pu = backbone.predict(z, t, uncond, ones_u);
        const auto pc = backbone.predict(z, t, cond, ones_c);
        z = scheduler_step(z, cfg_combine(pu.eps, pc.eps, cfg.cfg_scale), t, sched);
    }
    return z;
}

}  // namespace

TEST_CASE("stage_of walks background -> object -> free") {
    RunConfig cfg = small_config(30, 1);
    cfg.gating.r_bg_end = 0.20;
    cfg.gating.r_obj_end = 0.40;
    CHECK(stage_of(0, cfg) == GatingStage::background);
    CHECK(stage_of(29, cfg) == GatingStage::free_run);
    // r = i/29 < 0.2 up to and including i = 5
    for (int i = 0; i <= 5; ++i) CHECK(stage_of(i, cfg) == GatingStage::background);
    CHECK(stage_of(6, cfg) == GatingStage::object);
    for (int i = 6; i <= 11; ++i) CHECK(stage_of(i, cfg) == GatingStage::object);
    CHECK(stage_of(12, cfg) == GatingStage::free_run);
    CHECK_THROWS_AS(stage_of(30, cfg), std::invalid_argument);
}

TEST_CASE("init_paths seeds distinct deterministic trajectories") {
    const RunConfig cfg = small_config(8, 4);
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const auto d = beach_decomposition();

    auto paths = init_paths(cfg, d, backbone);
    REQUIRE(paths.size() == 4);
    auto again = init_paths(cfg, d, backbone);
    for (size_t k = 0; k < paths.size(); ++k) {
        CHECK(paths[k].id == static_cast<int>(k));
        CHECK(paths[k].latent.values == again[k].latent.values);
        CHECK(paths[k].bg_trajectory.size() == 8);
        CHECK(paths[k].live);
    }
    // pairwise distinct initial latents
    for (size_t a = 0; a < paths.size(); ++a) {
        for (size_t b = a + 1; b < paths.size(); ++b) {
            double max_abs = 0.0;
            for (size_t i = 0; i < paths[a].latent.values.size(); ++i) {
                max_abs = std::max(max_abs, std::abs(paths[a].latent.values[i] -
                                                     paths[b].latent.values[i]));
            }
            CHECK(max_abs > 0.0);
        }
    }
}

TEST_CASE("K=1 degenerates to a single guided sample") {
    RunConfig cfg = small_config(8, 1);
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);
    CHECK(result.images.size() == 1);
    CHECK(result.report.surviving_path_ids == std::vector<int>{0});
}

TEST_CASE("neutral controls reproduce independent single-path references bitwise") {
    RunConfig cfg = small_config(12, 3);
    cfg.projection.lambda_max = 0.0;  // projection off
    cfg.gating.gamma_max = 1.0;       // clamps every gain to 1
    cfg.prune.q = 0.0;                // quantile = min, nothing strictly below

    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto d = beach_decomposition();
    const auto result = run_sampling(cfg, d, backbone, provider);
    REQUIRE(result.final_latents.size() == 3);

    for (int k = 0; k < 3; ++k) {
        const auto reference =
            reference_single_path(cfg, d, backbone, cfg.seed + static_cast<uint64_t>(k));
        CHECK(result.final_latents[static_cast<size_t>(k)].values == reference.values);
    }
}

TEST_CASE("run_sampling is deterministic end to end") {
    RunConfig cfg = small_config(10, 3);
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto d = beach_decomposition();

    const auto a = run_sampling(cfg, d, backbone, provider);
    const auto b = run_sampling(cfg, d, backbone, provider);
    CHECK(a.report.to_json() == b.report.to_json());
    REQUIRE(a.images.size() == b.images.size());
    for (size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i].values == b.images[i].values);
    }
}

TEST_CASE("pruning barriers land exactly on multiples of the interval") {
    RunConfig cfg = small_config(30, 6);
    cfg.prune.interval = 5;
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);

    std::vector<int> steps;
    for (const auto& event : result.report.intervals) steps.push_back(event.step);
    CHECK(steps == std::vector<int>{5, 10, 15, 20, 25});
}

TEST_CASE("live count is non-increasing and never empties") {
    RunConfig cfg = small_config(20, 8);
    cfg.prune.interval = 4;
    cfg.prune.q = 0.6;  // aggressive
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);

    size_t prev_live = 8;
    for (const auto& event : result.report.intervals) {
        CHECK(event.rows.size() <= prev_live);
        size_t live = 0;
        for (const auto& row : event.rows) {
            if (!row.pruned) ++live;
        }
        CHECK(live >= 1);
        prev_live = live;
    }
    CHECK(!result.report.surviving_path_ids.empty());
    CHECK(result.images.size() == result.report.surviving_path_ids.size());
}

TEST_CASE("logged windows replay through prune_step to the logged decisions") {
    RunConfig cfg = small_config(20, 6);
    cfg.prune.interval = 4;
    cfg.prune.q = 0.5;
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);

    std::map<int, int> window_len;  // path -> observations so far
    for (const auto& event : result.report.intervals) {
        std::vector<PathSignals> live;
        std::vector<double> scores;
        std::vector<int> logged_pruned;
        for (const auto& row : event.rows) {
            window_len[row.path_id] += 1;
            live.push_back({row.path_id, row.tailh, row.align, window_len[row.path_id]});
            scores.push_back(row.composite);
            if (row.pruned) logged_pruned.push_back(row.path_id);
        }
        // composite scores recompute from the logged signals
        const auto recomputed = composite_scores(live, cfg.prune);
        for (size_t i = 0; i < scores.size(); ++i) {
            CHECK(recomputed[i] == doctest::Approx(scores[i]).epsilon(1e-12));
        }
        CHECK(prune_step(live, scores, cfg.prune) == logged_pruned);
    }
}

TEST_CASE("empty decomposition runs with the global mask fallback") {
    RunConfig cfg = small_config(8, 2);
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, Decomposition{}, backbone, provider);
    CHECK(!result.images.empty());
    // with no clauses the alignment signal is pinned to zero
    for (const auto& event : result.report.intervals) {
        for (const auto& row : event.rows) {
            CHECK(row.align == 0.0);
        }
    }
}

TEST_CASE("report json carries the pinned row schema") {
    RunConfig cfg = small_config(8, 2);
    cfg.prune.interval = 3;
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);
    const auto j = result.report.to_json();
    REQUIRE(j.contains("intervals"));
    for (const auto& event : j["intervals"]) {
        for (const auto& row : event["rows"]) {
            CHECK(row.contains("step"));
            CHECK(row.contains("path_id"));
            CHECK(row.contains("tailh"));
            CHECK(row.contains("align"));
            CHECK(row.contains("composite"));
            CHECK(row.contains("pruned"));
        }
    }
    CHECK(j.contains("surviving_path_ids"));
    CHECK(j.contains("surviving_seeds"));
}

TEST_CASE("dead paths are never stepped again") {
    RunConfig cfg = small_config(20, 5);
    cfg.prune.interval = 4;
    cfg.prune.q = 0.7;
    const ToyDenoiser backbone(cfg.geometry, sub_seed(cfg.seed, "backbone"));
    const HashAlignmentProvider provider(32, 5);
    const auto result = run_sampling(cfg, beach_decomposition(), backbone, provider);

    std::set<int> dead;
    for (const auto& event : result.report.intervals) {
        for (const auto& row : event.rows) {
            CHECK(dead.count(row.path_id) == 0);  // pruned paths never reappear
            if (row.pruned) dead.insert(row.path_id);
        }
    }
    for (int id : result.report.surviving_path_ids) {
        CHECK(dead.count(id) == 0);
    }
}

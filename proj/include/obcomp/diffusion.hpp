#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "obcomp/dsg.hpp"
#include "obcomp/numerics.hpp"

namespace obc {

/// One latent tensor C x h x w plus its scheduler position t (T = pure
/// noise, 0 = fully denoised).
struct LatentState {
    int channels = 0;
    int h = 0;
    int w = 0;
    int t_index = 0;
    std::vector<double> values;  // c*h*w row-major

    LatentState() = default;
    LatentState(int c, int h_, int w_, int t, double fill = 0.0);
    size_t size() const { return values.size(); }
    void validate() const;
};

/// Cumulative alpha products for T steps, strictly decreasing in (0,1].
struct NoiseSchedule {
    std::vector<double> alphas_cumprod;  // index 0 holds alpha_bar_1

    int steps() const { return static_cast<int>(alphas_cumprod.size()); }
    // alpha_bar_t with the t=0 endpoint pinned to 1
    double alpha_bar(int t) const;
    void validate() const;

    static NoiseSchedule linear_beta(int T, double beta_start = 1e-4, double beta_end = 2e-2);
};

struct TextEmbedding {
    std::vector<std::string> tokens;  // decoded token strings, length K
    int dim = 0;
    std::vector<double> vectors;  // K x dim row-major

    int token_count() const { return static_cast<int>(tokens.size()); }
    std::span<const double> vector(int k) const {
        return {vectors.data() + static_cast<size_t>(k) * dim, static_cast<size_t>(dim)};
    }
};

struct BackbonePrediction {
    std::vector<double> eps;  // latent-shaped noise prediction
    std::vector<AttentionRecord> records;
};

/// Denoiser contract. Implementations must be deterministic for fixed
/// inputs and safe for concurrent read-only use; one instance is shared
/// across every sampling path.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual BackbonePrediction predict(const LatentState& latent, int t,
                                       const TextEmbedding& text,
                                       const std::vector<double>& token_gains) const = 0;
    virtual int latent_channels() const = 0;
    virtual int latent_h() const = 0;
    virtual int latent_w() const = 0;
};

struct ToyGeometry {
    int channels = 4;
    int latent_h = 16;
    int latent_w = 16;
    int d_text = 32;
    int d_attn = 32;
    int max_tokens = 16;
};

/// Desk-scale denoiser: a fixed seeded linear map turns each latent column
/// into a query, single-layer softmax(QK^T/sqrt(d)) cross-attention against
/// the text vectors (with post-softmax token gating and row renormalization),
/// and a fixed linear readout of the attention-weighted values produces the
/// noise prediction. Emits the gated attention tensor as one record.
class ToyDenoiser final : public Backbone {
public:
    ToyDenoiser(const ToyGeometry& geom, uint64_t seed);

    BackbonePrediction predict(const LatentState& latent, int t, const TextEmbedding& text,
                               const std::vector<double>& token_gains) const override;
    int latent_channels() const override { return geom_.channels; }
    int latent_h() const override { return geom_.latent_h; }
    int latent_w() const override { return geom_.latent_w; }
    const ToyGeometry& geometry() const { return geom_; }

private:
    ToyGeometry geom_;
    std::vector<double> w_query_;    // d_attn x channels
    std::vector<double> w_key_;      // d_attn x d_text
    std::vector<double> w_value_;    // d_attn x d_text
    std::vector<double> w_readout_;  // channels x d_attn
};

/// Replays eps / attention tensors from container files; the adapter
/// boundary for externally produced backbones.
class FixtureBackbone final : public Backbone {
public:
    FixtureBackbone(const std::string& eps_path, const std::string& attention_path);

    BackbonePrediction predict(const LatentState& latent, int t, const TextEmbedding& text,
                               const std::vector<double>& token_gains) const override;
    int latent_channels() const override { return channels_; }
    int latent_h() const override { return h_; }
    int latent_w() const override { return w_; }

private:
    int channels_ = 0, h_ = 0, w_ = 0;
    std::vector<double> eps_;
    AttentionRecord record_;
};

// sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) noise, t in [1, T]
LatentState forward_noise(const LatentState& z0, int t, std::span<const double> noise,
                          const NoiseSchedule& sched);

// uncond + scale * (cond - uncond)
std::vector<double> cfg_combine(std::span<const double> eps_uncond,
                                std::span<const double> eps_cond, double scale);

// Deterministic DDIM-style update (eta = 0); at t=1 this lands on the
// predicted clean latent.
LatentState scheduler_step(const LatentState& z_t, std::span<const double> eps_hat, int t,
                           const NoiseSchedule& sched);

// Fixed linear channel mix -> per-image min-max normalize -> bilinear
// resize to size x size. Values in [0,1].
Grid2D decode_preview(const LatentState& z, int size);

// Single-path, projection-free, gating-free guided denoising conditioned on
// the background text; returns the latent after every one of the T steps.
std::vector<LatentState> background_trajectory(const TextEmbedding& bg_text,
                                               const TextEmbedding& uncond_text, uint64_t seed,
                                               double cfg_scale, const NoiseSchedule& sched,
                                               const Backbone& backbone);

// Seeded standard-normal latent at scheduler position T.
LatentState gaussian_latent(int channels, int h, int w, int T, uint64_t seed);

// Lowercased alphanumeric word split.
std::vector<std::string> tokenize_prompt(const std::string& text);

// Deterministic hash-seeded token embeddings; the empty prompt becomes a
// single "<uncond>" token so K stays positive. Token list is truncated to
// max_tokens.
TextEmbedding embed_text(const std::string& text, int dim, int max_tokens, uint64_t seed);

}  // namespace obc

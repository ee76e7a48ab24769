#pragma once

#include <optional>
#include <string>
#include <vector>

#include "obcomp/numerics.hpp"

namespace obc {

/// One layer's cross-attention probabilities, shape B x H x Q x K with each
/// (b,h,q) row a distribution over the K text tokens.
struct AttentionRecord {
    int layer_id = 0;
    int batch = 0;
    int heads = 0;
    int queries = 0;
    int tokens = 0;
    // set when Q is not a perfect square; h*w must equal queries
    std::optional<std::pair<int, int>> lattice;
    std::vector<double> p;  // b*h*q*k row-major

    double& at(int b, int h, int q, int k) {
        return p[((static_cast<size_t>(b) * heads + h) * queries + q) * tokens + k];
    }
    double at(int b, int h, int q, int k) const {
        return p[((static_cast<size_t>(b) * heads + h) * queries + q) * tokens + k];
    }

    // (h_l, w_l): explicit lattice when attached, else sqrt(Q) x sqrt(Q).
    // Throws when Q is not a perfect square and no lattice was given.
    std::pair<int, int> lattice_dims() const;

    // shape sanity + per-row sums within 1e-6 of 1
    void validate() const;
};

struct TokenGroups {
    std::vector<int> obj;  // sorted, unique
    std::vector<int> bg;   // sorted, unique; disjoint from obj
};

using SoftMask = Grid2D;

enum class MatchMode {
    whole_word,      // token equals a noun word, case-insensitive
    subword_prefix,  // token is a fragment of a noun word (split tokenizers)
};

/// Case-insensitive matching of decoded tokens against the two noun lists.
/// A token matching both lists lands in the object group (a warning is
/// printed); multi-word nouns match per word.
TokenGroups match_token_groups(const std::vector<std::string>& decoded_tokens,
                               const std::vector<std::string>& obj_nouns,
                               const std::vector<std::string>& bg_nouns,
                               MatchMode mode = MatchMode::whole_word);

/// Fuse the recorded layers into one soft mask per batch sample: head
/// average, token-set mean, reshape to the layer lattice, bilinear upsample
/// to (target_h, target_w), layer average, min-max normalize.
std::vector<SoftMask> compute_soft_mask(const std::vector<AttentionRecord>& records,
                                        const std::vector<int>& group,
                                        int target_h, int target_w,
                                        double eps = 1e-8,
                                        bool align_corners = false);

SoftMask complement_mask(const SoftMask& m);

// Binary threshold at tau (>= tau -> 1) followed by smooth_iters rounds of
// 3x3 average pooling.
SoftMask gate_mask(const SoftMask& m, double tau, int smooth_iters);

enum class GatingStage { background, object, free_run };

struct GatingConfig {
    double r_bg_end = 0.20;       // background stage covers r in [0, r_bg_end)
    double r_obj_end = 0.40;      // object stage covers r in [r_bg_end, r_obj_end)
    double gamma_max = 2.0;       // multiplier clamp [1/gamma_max, gamma_max]
    double gain_favored = 1.0;    // signed gain for the stage's favored group
    double gain_disfavored = -0.5;
};

/// Per-token multiplicative gains for one denoising step at relative
/// position r: clamp(1 + g_k * decay(r), 1/gamma_max, gamma_max) where the
/// favored/disfavored roles swap between the background and object stages
/// and decay falls linearly to zero at the stage boundary. Tokens in neither
/// group, steps outside the stage window, and the free stage all yield 1.
std::vector<double> token_gain_profile(GatingStage stage, double r, const TokenGroups& groups,
                                       const GatingConfig& cfg, int token_count);

}  // namespace obc

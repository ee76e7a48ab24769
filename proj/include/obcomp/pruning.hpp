#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "obcomp/dsg.hpp"
#include "obcomp/numerics.hpp"

namespace obc {

/// Per-path history of the two pruning signals; append-only within a run.
struct ScoreWindow {
    std::vector<double> tailh_history;
    std::vector<double> align_history;
    int min_len = 1;

    int length() const { return static_cast<int>(tailh_history.size()); }
    bool eligible() const { return length() >= min_len; }
};

enum class TailDirection {
    descending,  // top-r largest entropies (equation-literal)
    ascending,   // low-entropy tail reading
};

struct PruneConfig {
    double w_tail = 1.0;
    double w_clip = 2.0;
    double q = 0.35;            // quantile for the adaptive threshold
    double tail_fraction = 0.2; // r of the tail-entropy statistic
    int interval = 5;
    int min_live = 1;
    int min_len = 1;
    TailDirection tail_direction = TailDirection::descending;

    void validate() const;
};

/// Image/text embedding source for the alignment signal. Outputs are
/// L2-normalized and deterministic for a fixed provider seed.
class AlignmentProvider {
public:
    virtual ~AlignmentProvider() = default;
    virtual std::vector<double> embed_image(const Grid2D& preview) const = 0;
    virtual std::vector<double> embed_text(const std::string& clause) const = 0;
};

/// Desk-scale provider: previews are pooled to an 8x8 patch grid, text is a
/// seeded bag-of-tokens sum; both L2-normalized.
class HashAlignmentProvider final : public AlignmentProvider {
public:
    HashAlignmentProvider(int dim, uint64_t seed);
    std::vector<double> embed_image(const Grid2D& preview) const override;
    std::vector<double> embed_text(const std::string& clause) const override;

private:
    int dim_;
    uint64_t seed_;
};

/// Remote provider. POSTs JSON to <endpoint>/embed_image with the preview
/// as base64 PGM bytes and to <endpoint>/embed_text with the clause string;
/// expects {"embedding": [...]} back.
class HttpAlignmentProvider final : public AlignmentProvider {
public:
    HttpAlignmentProvider(std::string host, int port, std::string path_prefix = "");
    std::vector<double> embed_image(const Grid2D& preview) const override;
    std::vector<double> embed_text(const std::string& clause) const override;

private:
    std::vector<double> post(const std::string& route, const std::string& body) const;
    std::string host_;
    int port_;
    std::string prefix_;
};

/// Replays embeddings captured by RecordingAlignmentProvider: images keyed
/// by an FNV hash of their PGM bytes, texts keyed verbatim.
class ReplayAlignmentProvider final : public AlignmentProvider {
public:
    explicit ReplayAlignmentProvider(const std::string& fixture_path);
    std::vector<double> embed_image(const Grid2D& preview) const override;
    std::vector<double> embed_text(const std::string& clause) const override;

private:
    std::map<std::string, std::vector<double>> images_;
    std::map<std::string, std::vector<double>> texts_;
};

/// Wraps another provider and captures every call into a replay fixture.
class RecordingAlignmentProvider final : public AlignmentProvider {
public:
    RecordingAlignmentProvider(const AlignmentProvider& inner, std::string fixture_path);
    ~RecordingAlignmentProvider();
    std::vector<double> embed_image(const Grid2D& preview) const override;
    std::vector<double> embed_text(const std::string& clause) const override;
    void flush() const;

private:
    const AlignmentProvider& inner_;
    std::string path_;
    mutable std::map<std::string, std::vector<double>> images_;
    mutable std::map<std::string, std::vector<double>> texts_;
};

std::string preview_fingerprint(const Grid2D& preview);

/// Mean of the recorded window's attention tensors over layers, heads, and
/// batch entries, as one Q x K matrix with rows renormalized to sum 1.
/// Layers at different resolutions are block-averaged down to the coarsest
/// lattice first (lattice sides must divide evenly).
std::vector<std::vector<double>> window_attention_average(
    const std::vector<AttentionRecord>& records);

struct DirectionalEntropies {
    std::vector<double> pix2tok;  // length Q
    std::vector<double> tok2pix;  // length K
};

DirectionalEntropies directional_entropies(const std::vector<std::vector<double>>& P);

/// Mean entropy over the top-ceil(r*n) of each direction (sorted per
/// tail_direction), averaged across the two directions.
double tail_entropy(const std::vector<double>& pix2tok, const std::vector<double>& tok2pix,
                    double r, TailDirection direction = TailDirection::descending);

/// Mean cosine similarity between the preview embedding and each clause
/// embedding. Provider failures propagate to the caller.
double alignment_score(const Grid2D& preview, const std::vector<std::string>& clauses,
                       const AlignmentProvider& provider);

struct PathSignals {
    int id = 0;
    double tailh = 0.0;
    double align = 0.0;
    int window_len = 0;
};

/// w_tail * norm(-TailH) + w_clip * norm(CLIP), min-max normalized over the
/// live set; a degenerate (all-equal) signal normalizes to 0.5 everywhere.
std::vector<double> composite_scores(const std::vector<PathSignals>& live,
                                     const PruneConfig& cfg);

/// Paths strictly below the q-quantile of the live scores are pruned once
/// their window reached min_len; the live set never shrinks below min_live
/// (highest scores among the would-be-pruned survive, ties to the lowest
/// id). Returns pruned ids in ascending order.
std::vector<int> prune_step(const std::vector<PathSignals>& live,
                            const std::vector<double>& scores, const PruneConfig& cfg);

}  // namespace obc

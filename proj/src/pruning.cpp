#include "obcomp/pruning.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <iostream>
#include <stdexcept>

#include "obcomp/rng.hpp"

namespace obc {

void PruneConfig::validate() const {
    if (w_tail < 0.0 || w_clip < 0.0 || w_tail + w_clip <= 0.0) {
        throw std::invalid_argument("PruneConfig: weights must be non-negative with positive sum");
    }
    if (q < 0.0 || q > 1.0) {
        throw std::invalid_argument("PruneConfig: q outside [0,1]");
    }
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0) {
        throw std::invalid_argument("PruneConfig: tail_fraction outside (0,1]");
    }
    if (interval < 1 || min_live < 1 || min_len < 1) {
        throw std::invalid_argument("PruneConfig: interval, min_live, min_len must be >= 1");
    }
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void l2_normalize(std::vector<double>& v) {
    const double n = std::sqrt(dot(v, v));
    if (n < 1e-12) {
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    for (auto& x : v) x /= n;
}

// block mean from (h_in x w_in) to (h_out x w_out); sides must divide evenly
void pool_column(const std::vector<double>& in, int h_in, int w_in, std::vector<double>& out,
                 int h_out, int w_out) {
    const int fy = h_in / h_out;
    const int fx = w_in / w_out;
    const double inv = 1.0 / (fy * fx);
    for (int y = 0; y < h_out; ++y) {
        for (int x = 0; x < w_out; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < fy; ++dy) {
                for (int dx = 0; dx < fx; ++dx) {
                    acc += in[static_cast<size_t>(y * fy + dy) * w_in + (x * fx + dx)];
                }
            }
            out[static_cast<size_t>(y) * w_out + x] = acc * inv;
        }
    }
}

}  // namespace

std::vector<std::vector<double>> window_attention_average(
    const std::vector<AttentionRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("window_attention_average: empty record list");
    }
    const int K = records[0].tokens;
    int h_min = records[0].lattice_dims().first;
    int w_min = records[0].lattice_dims().second;
    for (const auto& rec : records) {
        if (rec.tokens != K) {
            throw std::invalid_argument("window_attention_average: records disagree on K");
        }
        const auto [hl, wl] = rec.lattice_dims();
        h_min = std::min(h_min, hl);
        w_min = std::min(w_min, wl);
    }
    const int Q = h_min * w_min;

    std::vector<std::vector<double>> acc(static_cast<size_t>(Q),
                                         std::vector<double>(static_cast<size_t>(K), 0.0));
    size_t slices = 0;
    std::vector<double> col_in, col_out(static_cast<size_t>(Q));
    for (const auto& rec : records) {
        const auto [hl, wl] = rec.lattice_dims();
        if (hl % h_min != 0 || wl % w_min != 0) {
            throw std::invalid_argument(
                "window_attention_average: layer lattice not divisible by the coarsest lattice");
        }
        col_in.resize(static_cast<size_t>(rec.queries));
        for (int b = 0; b < rec.batch; ++b) {
            for (int h = 0; h < rec.heads; ++h) {
                ++slices;
                for (int k = 0; k < K; ++k) {
                    for (int q = 0; q < rec.queries; ++q) {
                        col_in[static_cast<size_t>(q)] = rec.at(b, h, q, k);
                    }
                    if (hl == h_min && wl == w_min) {
                        for (int q = 0; q < Q; ++q) {
                            acc[static_cast<size_t>(q)][static_cast<size_t>(k)] +=
                                col_in[static_cast<size_t>(q)];
                        }
                    } else {
                        pool_column(col_in, hl, wl, col_out, h_min, w_min);
                        for (int q = 0; q < Q; ++q) {
                            acc[static_cast<size_t>(q)][static_cast<size_t>(k)] +=
                                col_out[static_cast<size_t>(q)];
                        }
                    }
                }
            }
        }
    }

    for (auto& row : acc) {
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum <= 0.0) {
            std::fill(row.begin(), row.end(), 1.0 / K);
            continue;
        }
        for (auto& v : row) v /= sum;
    }
    (void)slices;
    return acc;
}

DirectionalEntropies directional_entropies(const std::vector<std::vector<double>>& P) {
    if (P.empty() || P[0].empty()) {
        throw std::invalid_argument("directional_entropies: empty matrix");
    }
    const size_t Q = P.size();
    const size_t K = P[0].size();
    DirectionalEntropies out;
    out.pix2tok.reserve(Q);
    for (const auto& row : P) {
        if (row.size() != K) {
            throw std::invalid_argument("directional_entropies: ragged matrix");
        }
        out.pix2tok.push_back(shannon_entropy(row));
    }

    out.tok2pix.resize(K, 0.0);
    std::vector<double> column(Q);
    for (size_t k = 0; k < K; ++k) {
        double col_sum = 0.0;
        for (size_t q = 0; q < Q; ++q) {
            column[q] = P[q][k];
            col_sum += column[q];
        }
        if (col_sum <= 0.0) {
            std::cerr << "warning: token " << k << " receives zero attention; entropy set to 0\n";
            out.tok2pix[k] = 0.0;
            continue;
        }
        for (auto& v : column) v /= col_sum;
        out.tok2pix[k] = shannon_entropy(column);
    }
    return out;
}

namespace {

double tail_mean(std::vector<double> values, double r, TailDirection direction) {
    if (direction == TailDirection::descending) {
        std::sort(values.begin(), values.end(), std::greater<double>());
    } else {
        std::sort(values.begin(), values.end());
    }
    const size_t take =
        std::min(values.size(),
                 static_cast<size_t>(std::ceil(r * static_cast<double>(values.size()))));
    const size_t n = std::max<size_t>(take, 1);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += values[i];
    return acc / static_cast<double>(n);
}

}  // namespace

double tail_entropy(const std::vector<double>& pix2tok, const std::vector<double>& tok2pix,
                    double r, TailDirection direction) {
    if (pix2tok.empty() || tok2pix.empty()) {
        throw std::invalid_argument("tail_entropy: empty entropy list");
    }
    if (!(r > 0.0) || r > 1.0) {
        throw std::invalid_argument("tail_entropy: r outside (0,1]");
    }
    return 0.5 * (tail_mean(pix2tok, r, direction) + tail_mean(tok2pix, r, direction));
}

double alignment_score(const Grid2D& preview, const std::vector<std::string>& clauses,
                       const AlignmentProvider& provider) {
    if (clauses.empty()) {
        throw std::invalid_argument("alignment_score: no clauses");
    }
    const auto img = provider.embed_image(preview);
    double acc = 0.0;
    for (const auto& clause : clauses) {
        const auto txt = provider.embed_text(clause);
        if (txt.size() != img.size()) {
            throw std::runtime_error("alignment_score: provider embedding dims differ");
        }
        acc += dot(img, txt);
    }
    return acc / static_cast<double>(clauses.size());
}

namespace {

std::vector<double> minmax_or_half(const std::vector<double>& x) {
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(x.size());
    if (hi - lo <= 0.0) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - lo) / (hi - lo);
    return out;
}

}  // namespace

std::vector<double> composite_scores(const std::vector<PathSignals>& live,
                                     const PruneConfig& cfg) {
    cfg.validate();
    if (live.empty()) {
        throw std::invalid_argument("composite_scores: no live paths");
    }
    std::vector<double> neg_tail(live.size()), align(live.size());
    for (size_t i = 0; i < live.size(); ++i) {
        neg_tail[i] = -live[i].tailh;
        align[i] = live[i].align;
    }
    const auto tail_norm = minmax_or_half(neg_tail);
    const auto align_norm = minmax_or_half(align);
    std::vector<double> scores(live.size());
    for (size_t i = 0; i < live.size(); ++i) {
        scores[i] = cfg.w_tail * tail_norm[i] + cfg.w_clip * align_norm[i];
    }
    return scores;
}

std::vector<int> prune_step(const std::vector<PathSignals>& live,
                            const std::vector<double>& scores, const PruneConfig& cfg) {
    cfg.validate();
    if (live.empty()) {
        throw std::invalid_argument("prune_step: no live paths");
    }
    if (scores.size() != live.size()) {
        throw std::invalid_argument("prune_step: score/path count mismatch");
    }
    const double tau_q = quantile(scores, cfg.q);

    struct Candidate {
        int id;
        double score;
    };
    std::vector<Candidate> pruned;
    for (size_t i = 0; i < live.size(); ++i) {
        if (scores[i] < tau_q && live[i].window_len >= cfg.min_len) {
            pruned.push_back({live[i].id, scores[i]});
        }
    }

    const int live_after = static_cast<int>(live.size()) - static_cast<int>(pruned.size());
    if (live_after < cfg.min_live) {
        // hand the floor back to the best-scoring would-be victims
        int to_rescue = cfg.min_live - live_after;
        to_rescue = std::min<int>(to_rescue, static_cast<int>(pruned.size()));
        std::sort(pruned.begin(), pruned.end(), [](const Candidate& a, const Candidate& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        pruned.erase(pruned.begin(), pruned.begin() + to_rescue);
    }

    std::vector<int> ids;
    ids.reserve(pruned.size());
    for (const auto& c : pruned) ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

HashAlignmentProvider::HashAlignmentProvider(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) {
        throw std::invalid_argument("HashAlignmentProvider: dim must be positive");
    }
}

std::vector<double> HashAlignmentProvider::embed_image(const Grid2D& preview) const {
    preview.validate();
    const int grid = 8;
    std::vector<double> patches(static_cast<size_t>(grid) * grid, 0.0);
    std::vector<int> counts(static_cast<size_t>(grid) * grid, 0);
    for (int y = 0; y < preview.h; ++y) {
        const int py = std::min(grid - 1, y * grid / preview.h);
        for (int x = 0; x < preview.w; ++x) {
            const int px = std::min(grid - 1, x * grid / preview.w);
            patches[static_cast<size_t>(py) * grid + px] += preview.at(y, x);
            counts[static_cast<size_t>(py) * grid + px] += 1;
        }
    }
    for (size_t i = 0; i < patches.size(); ++i) {
        if (counts[i] > 0) patches[i] /= counts[i];
    }
    // project the patch grid into the embedding space with seeded directions
    std::vector<double> out(static_cast<size_t>(dim_), 0.0);
    GaussianRng rng(sub_seed(seed_, "image-proj"));
    for (size_t p = 0; p < patches.size(); ++p) {
        for (int d = 0; d < dim_; ++d) {
            out[static_cast<size_t>(d)] += patches[p] * rng.next();
        }
    }
    l2_normalize(out);
    return out;
}

std::vector<double> HashAlignmentProvider::embed_text(const std::string& clause) const {
    std::vector<double> out(static_cast<size_t>(dim_), 0.0);
    std::string token;
    auto flush_token = [&]() {
        if (token.empty()) return;
        GaussianRng rng(sub_seed(seed_, "text-" + token));
        for (int d = 0; d < dim_; ++d) out[static_cast<size_t>(d)] += rng.next();
        token.clear();
    };
    for (char c : clause) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush_token();
        }
    }
    flush_token();
    l2_normalize(out);
    return out;
}

}  // namespace obc

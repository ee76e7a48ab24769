#include "obcomp/dsg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>

namespace obc {

namespace {

bool is_perfect_square(int q, int& side) {
    side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q))));
    return side >= 1 && side * side == q;
}

std::string to_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool token_matches(const std::string& token_lc, const std::vector<std::string>& noun_words_lc,
                   MatchMode mode) {
    if (token_lc.empty()) return false;
    for (const auto& word : noun_words_lc) {
        if (mode == MatchMode::whole_word) {
            if (token_lc == word) return true;
        } else {
            if (word.find(token_lc) != std::string::npos) return true;
        }
    }
    return false;
}

}  // namespace

std::pair<int, int> AttentionRecord::lattice_dims() const {
    if (lattice) {
        if (lattice->first < 1 || lattice->second < 1 ||
            lattice->first * lattice->second != queries) {
            throw std::invalid_argument("AttentionRecord: lattice does not match query count");
        }
        return *lattice;
    }
    int side = 0;
    if (!is_perfect_square(queries, side)) {
        throw std::invalid_argument(
            "AttentionRecord: query count is not a perfect square and no explicit lattice given");
    }
    return {side, side};
}

void AttentionRecord::validate() const {
    if (batch < 1 || heads < 1 || queries < 1 || tokens < 1) {
        throw std::invalid_argument("AttentionRecord: non-positive dimension");
    }
    if (p.size() != static_cast<size_t>(batch) * heads * queries * tokens) {
        throw std::invalid_argument("AttentionRecord: payload size mismatch");
    }
    lattice_dims();
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            for (int q = 0; q < queries; ++q) {
                double sum = 0.0;
                for (int k = 0; k < tokens; ++k) {
                    const double v = at(b, h, q, k);
                    if (!(v >= 0.0) || !std::isfinite(v)) {
                        throw std::invalid_argument("AttentionRecord: invalid probability entry");
                    }
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-6) {
                    throw std::invalid_argument("AttentionRecord: row does not sum to 1");
                }
            }
        }
    }
}

TokenGroups match_token_groups(const std::vector<std::string>& decoded_tokens,
                               const std::vector<std::string>& obj_nouns,
                               const std::vector<std::string>& bg_nouns, MatchMode mode) {
    std::vector<std::string> obj_words, bg_words;
    for (const auto& n : obj_nouns) {
        for (auto& w : split_words(to_lower(n))) obj_words.push_back(w);
    }
    for (const auto& n : bg_nouns) {
        for (auto& w : split_words(to_lower(n))) bg_words.push_back(w);
    }

    TokenGroups groups;
    for (size_t i = 0; i < decoded_tokens.size(); ++i) {
        const std::string tok = to_lower(decoded_tokens[i]);
        const bool in_obj = token_matches(tok, obj_words, mode);
        const bool in_bg = token_matches(tok, bg_words, mode);
        if (in_obj && in_bg) {
            std::cerr << "warning: token '" << decoded_tokens[i]
                      << "' matches both groups; assigning to object\n";
            groups.obj.push_back(static_cast<int>(i));
        } else if (in_obj) {
            groups.obj.push_back(static_cast<int>(i));
        } else if (in_bg) {
            groups.bg.push_back(static_cast<int>(i));
        }
    }
    return groups;
}

std::vector<SoftMask> compute_soft_mask(const std::vector<AttentionRecord>& records,
                                        const std::vector<int>& group, int target_h, int target_w,
                                        double eps, bool align_corners) {
    if (group.empty()) {
        throw std::invalid_argument("compute_soft_mask: empty token group");
    }
    if (records.empty()) {
        throw std::invalid_argument("compute_soft_mask: no attention records");
    }
    if (target_h < 1 || target_w < 1) {
        throw std::invalid_argument("compute_soft_mask: degenerate target resolution");
    }
    const int batch = records[0].batch;
    const int tokens = records[0].tokens;
    for (const auto& rec : records) {
        if (rec.batch != batch || rec.tokens != tokens) {
            throw std::invalid_argument("compute_soft_mask: records disagree on B or K");
        }
        for (int k : group) {
            if (k < 0 || k >= tokens) {
                throw std::invalid_argument("compute_soft_mask: token index out of range");
            }
        }
    }

    std::vector<SoftMask> out;
    out.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        Grid2D fused(target_h, target_w, 0.0);
        for (const auto& rec : records) {
            const auto [hl, wl] = rec.lattice_dims();
            Grid2D layer_map(hl, wl);
            for (int q = 0; q < rec.queries; ++q) {
                // head average per token, then the token-set mean
                double token_sum = 0.0;
                for (int k : group) {
                    double head_sum = 0.0;
                    for (int h = 0; h < rec.heads; ++h) head_sum += rec.at(b, h, q, k);
                    token_sum += head_sum / rec.heads;
                }
                layer_map.values[static_cast<size_t>(q)] = token_sum / group.size();
            }
            const Grid2D up = bilinear_upsample(layer_map, target_h, target_w, align_corners);
            for (size_t i = 0; i < fused.values.size(); ++i) {
                fused.values[i] += up.values[i];
            }
        }
        for (auto& v : fused.values) v /= static_cast<double>(records.size());
        fused.values = minmax_normalize(fused.values, eps);
        out.push_back(std::move(fused));
    }
    return out;
}

SoftMask complement_mask(const SoftMask& m) {
    SoftMask out = m;
    for (auto& v : out.values) v = 1.0 - v;
    return out;
}

SoftMask gate_mask(const SoftMask& m, double tau, int smooth_iters) {
    if (smooth_iters < 0) {
        throw std::invalid_argument("gate_mask: negative smoothing iterations");
    }
    SoftMask out = m;
    for (auto& v : out.values) v = v >= tau ? 1.0 : 0.0;
    for (int i = 0; i < smooth_iters; ++i) {
        out = avg_pool_3x3(out);
    }
    return out;
}

std::vector<double> token_gain_profile(GatingStage stage, double r, const TokenGroups& groups,
                                       const GatingConfig& cfg, int token_count) {
    if (cfg.gamma_max < 1.0) {
        throw std::invalid_argument("token_gain_profile: gamma_max must be >= 1");
    }
    if (token_count < 0) {
        throw std::invalid_argument("token_gain_profile: negative token count");
    }
    std::vector<double> gains(static_cast<size_t>(token_count), 1.0);
    if (stage == GatingStage::free_run) {
        return gains;
    }

    double window_lo = 0.0, window_hi = 0.0;
    const std::vector<int>* favored = nullptr;
    const std::vector<int>* disfavored = nullptr;
    if (stage == GatingStage::background) {
        window_lo = 0.0;
        window_hi = cfg.r_bg_end;
        favored = &groups.bg;
        disfavored = &groups.obj;
    } else {
        window_lo = cfg.r_bg_end;
        window_hi = cfg.r_obj_end;
        favored = &groups.obj;
        disfavored = &groups.bg;
    }
    if (r < window_lo || r >= window_hi || window_hi <= 0.0) {
        return gains;
    }
    const double decay = std::max(0.0, 1.0 - r / window_hi);
    const double lo_clamp = 1.0 / cfg.gamma_max;
    auto apply = [&](const std::vector<int>& idx, double signed_gain) {
        for (int k : idx) {
            if (k < 0 || k >= token_count) continue;
            gains[static_cast<size_t>(k)] =
                std::clamp(1.0 + signed_gain * decay, lo_clamp, cfg.gamma_max);
        }
    };
    apply(*favored, cfg.gain_favored);
    apply(*disfavored, cfg.gain_disfavored);
    return gains;
}

}  // namespace obc

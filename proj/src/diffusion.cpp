#include "obcomp/diffusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "obcomp/rng.hpp"
#include "obcomp/tensor_io.hpp"

namespace obc {

LatentState::LatentState(int c, int h_, int w_, int t, double fill)
    : channels(c), h(h_), w(w_), t_index(t) {
    if (c < 1 || h_ < 1 || w_ < 1) {
        throw std::invalid_argument("LatentState: non-positive dimension");
    }
    values.assign(static_cast<size_t>(c) * h_ * w_, fill);
}

void LatentState::validate() const {
    if (channels < 1 || h < 1 || w < 1) {
        throw std::invalid_argument("LatentState: non-positive dimension");
    }
    if (values.size() != static_cast<size_t>(channels) * h * w) {
        throw std::invalid_argument("LatentState: payload size mismatch");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("LatentState: non-finite entry");
        }
    }
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    if (t < 1 || t > steps()) {
        throw std::invalid_argument("NoiseSchedule: timestep out of range");
    }
    return alphas_cumprod[static_cast<size_t>(t - 1)];
}

void NoiseSchedule::validate() const {
    if (alphas_cumprod.empty()) {
        throw std::invalid_argument("NoiseSchedule: empty schedule");
    }
    double prev = 1.0;
    for (double a : alphas_cumprod) {
        if (!(a > 0.0) || a > 1.0 || a >= prev) {
            throw std::invalid_argument("NoiseSchedule: alphas must be strictly decreasing in (0,1]");
        }
        prev = a;
    }
}

NoiseSchedule NoiseSchedule::linear_beta(int T, double beta_start, double beta_end) {
    if (T < 1) {
        throw std::invalid_argument("NoiseSchedule: T must be positive");
    }
    NoiseSchedule s;
    s.alphas_cumprod.reserve(static_cast<size_t>(T));
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double beta =
            T > 1 ? beta_start + (beta_end - beta_start) * i / (T - 1) : beta_start;
        prod *= 1.0 - beta;
        s.alphas_cumprod.push_back(prod);
    }
    s.validate();
    return s;
}

namespace {

std::vector<double> seeded_matrix(uint64_t seed, int rows, int cols) {
    GaussianRng rng(seed);
    std::vector<double> m(static_cast<size_t>(rows) * cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : m) v = rng.next() * scale;
    return m;
}

// y = W x, W is rows x cols
void matvec(std::span<const double> w, std::span<const double> x, std::span<double> y, int rows,
            int cols) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = w.data() + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += row[c] * x[static_cast<size_t>(c)];
        y[static_cast<size_t>(r)] = acc;
    }
}

}  // namespace

ToyDenoiser::ToyDenoiser(const ToyGeometry& geom, uint64_t seed) : geom_(geom) {
    if (geom.channels < 1 || geom.latent_h < 1 || geom.latent_w < 1 || geom.d_text < 1 ||
        geom.d_attn < 1 || geom.max_tokens < 1) {
        throw std::invalid_argument("ToyDenoiser: invalid geometry");
    }
    w_query_ = seeded_matrix(sub_seed(seed, "toy-query"), geom.d_attn, geom.channels);
    w_key_ = seeded_matrix(sub_seed(seed, "toy-key"), geom.d_attn, geom.d_text);
    w_value_ = seeded_matrix(sub_seed(seed, "toy-value"), geom.d_attn, geom.d_text);
    w_readout_ = seeded_matrix(sub_seed(seed, "toy-readout"), geom.channels, geom.d_attn);
}

BackbonePrediction ToyDenoiser::predict(const LatentState& latent, int /*t*/,
                                        const TextEmbedding& text,
                                        const std::vector<double>& token_gains) const {
    if (latent.channels != geom_.channels || latent.h != geom_.latent_h ||
        latent.w != geom_.latent_w) {
        throw std::invalid_argument("ToyDenoiser: latent geometry mismatch");
    }
    if (text.dim != geom_.d_text) {
        throw std::invalid_argument("ToyDenoiser: text embedding dim mismatch");
    }
    const int K = text.token_count();
    if (K < 1 || K > geom_.max_tokens) {
        throw std::invalid_argument("ToyDenoiser: token count out of range");
    }
    if (token_gains.size() != static_cast<size_t>(K)) {
        throw std::invalid_argument("ToyDenoiser: gain profile length != K");
    }

    const int Q = geom_.latent_h * geom_.latent_w;
    const int d = geom_.d_attn;

    std::vector<double> keys(static_cast<size_t>(K) * d);
    std::vector<double> vals(static_cast<size_t>(K) * d);
    for (int k = 0; k < K; ++k) {
        matvec(w_key_, text.vector(k), {keys.data() + static_cast<size_t>(k) * d, (size_t)d}, d,
               geom_.d_text);
        matvec(w_value_, text.vector(k), {vals.data() + static_cast<size_t>(k) * d, (size_t)d}, d,
               geom_.d_text);
    }

    const bool gated = std::any_of(token_gains.begin(), token_gains.end(),
                                   [](double g) { return g != 1.0; });

    AttentionRecord rec;
    rec.layer_id = 0;
    rec.batch = 1;
    rec.heads = 1;
    rec.queries = Q;
    rec.tokens = K;
    rec.p.resize(static_cast<size_t>(Q) * K);

    BackbonePrediction out;
    out.eps.assign(latent.values.size(), 0.0);

    std::vector<double> query(static_cast<size_t>(d));
    std::vector<double> channel_col(static_cast<size_t>(geom_.channels));
    std::vector<double> scores(static_cast<size_t>(K));
    std::vector<double> context(static_cast<size_t>(d));
    std::vector<double> eps_col(static_cast<size_t>(geom_.channels));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    const size_t plane = static_cast<size_t>(geom_.latent_h) * geom_.latent_w;

    for (int q = 0; q < Q; ++q) {
        for (int c = 0; c < geom_.channels; ++c) {
            channel_col[static_cast<size_t>(c)] = latent.values[static_cast<size_t>(c) * plane + q];
        }
        matvec(w_query_, channel_col, query, d, geom_.channels);

        double max_score = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            double dot = 0.0;
            const double* kv = keys.data() + static_cast<size_t>(k) * d;
            for (int i = 0; i < d; ++i) dot += query[static_cast<size_t>(i)] * kv[i];
            scores[static_cast<size_t>(k)] = dot * inv_sqrt_d;
            max_score = std::max(max_score, scores[static_cast<size_t>(k)]);
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) {
            scores[static_cast<size_t>(k)] = std::exp(scores[static_cast<size_t>(k)] - max_score);
            denom += scores[static_cast<size_t>(k)];
        }
        for (int k = 0; k < K; ++k) scores[static_cast<size_t>(k)] /= denom;

        if (gated) {
            double gsum = 0.0;
            for (int k = 0; k < K; ++k) {
                scores[static_cast<size_t>(k)] *= token_gains[static_cast<size_t>(k)];
                gsum += scores[static_cast<size_t>(k)];
            }
            for (int k = 0; k < K; ++k) scores[static_cast<size_t>(k)] /= gsum;
        }

        std::fill(context.begin(), context.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const double wk = scores[static_cast<size_t>(k)];
            rec.p[static_cast<size_t>(q) * K + k] = wk;
            const double* vv = vals.data() + static_cast<size_t>(k) * d;
            for (int i = 0; i < d; ++i) context[static_cast<size_t>(i)] += wk * vv[i];
        }
        matvec(w_readout_, context, eps_col, geom_.channels, d);
        for (int c = 0; c < geom_.channels; ++c) {
            out.eps[static_cast<size_t>(c) * plane + q] = eps_col[static_cast<size_t>(c)];
        }
    }

    out.records.push_back(std::move(rec));
    return out;
}

FixtureBackbone::FixtureBackbone(const std::string& eps_path, const std::string& attention_path) {
    const TensorFile eps = read_tensor(eps_path);
    if (eps.shape.size() != 3) {
        throw std::invalid_argument("FixtureBackbone: eps tensor must have shape [C,h,w]");
    }
    channels_ = static_cast<int>(eps.shape[0]);
    h_ = static_cast<int>(eps.shape[1]);
    w_ = static_cast<int>(eps.shape[2]);
    eps_ = eps.data;

    const TensorFile att = read_tensor(attention_path);
    if (att.shape.size() != 4) {
        throw std::invalid_argument("FixtureBackbone: attention tensor must have shape [B,H,Q,K]");
    }
    record_.layer_id = 0;
    record_.batch = static_cast<int>(att.shape[0]);
    record_.heads = static_cast<int>(att.shape[1]);
    record_.queries = static_cast<int>(att.shape[2]);
    record_.tokens = static_cast<int>(att.shape[3]);
    record_.p = att.data;
    record_.validate();
}

BackbonePrediction FixtureBackbone::predict(const LatentState& latent, int /*t*/,
                                            const TextEmbedding& /*text*/,
                                            const std::vector<double>& /*token_gains*/) const {
    if (latent.channels != channels_ || latent.h != h_ || latent.w != w_) {
        throw std::invalid_argument("FixtureBackbone: latent geometry mismatch");
    }
    BackbonePrediction out;
    out.eps = eps_;
    out.records.push_back(record_);
    return out;
}

LatentState forward_noise(const LatentState& z0, int t, std::span<const double> noise,
                          const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps()) {
        throw std::invalid_argument("forward_noise: t out of range");
    }
    if (noise.size() != z0.values.size()) {
        throw std::invalid_argument("forward_noise: noise shape mismatch");
    }
    const double a = sched.alpha_bar(t);
    const double sa = std::sqrt(a);
    const double sn = std::sqrt(1.0 - a);
    LatentState out = z0;
    out.t_index = t;
    for (size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = sa * z0.values[i] + sn * noise[i];
    }
    return out;
}

std::vector<double> cfg_combine(std::span<const double> eps_uncond,
                                std::span<const double> eps_cond, double scale) {
    if (eps_uncond.size() != eps_cond.size()) {
        throw std::invalid_argument("cfg_combine: shape mismatch");
    }
    std::vector<double> out(eps_uncond.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    }
    return out;
}

LatentState scheduler_step(const LatentState& z_t, std::span<const double> eps_hat, int t,
                           const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps()) {
        throw std::invalid_argument("scheduler_step: t out of range");
    }
    if (eps_hat.size() != z_t.values.size()) {
        throw std::invalid_argument("scheduler_step: eps shape mismatch");
    }
    const double a_t = sched.alpha_bar(t);
    const double a_prev = sched.alpha_bar(t - 1);
    const double sqrt_a_t = std::sqrt(a_t);
    const double sqrt_om_t = std::sqrt(1.0 - a_t);
    const double sqrt_a_prev = std::sqrt(a_prev);
    const double sqrt_om_prev = std::sqrt(1.0 - a_prev);

    LatentState out = z_t;
    out.t_index = t - 1;
    for (size_t i = 0; i < out.values.size(); ++i) {
        const double z0_hat = (z_t.values[i] - sqrt_om_t * eps_hat[i]) / sqrt_a_t;
        out.values[i] = sqrt_a_prev * z0_hat + sqrt_om_prev * eps_hat[i];
        if (!std::isfinite(out.values[i])) {
            throw std::runtime_error("scheduler_step: non-finite latent value");
        }
    }
    return out;
}

Grid2D decode_preview(const LatentState& z, int size) {
    if (size < 8) {
        throw std::invalid_argument("decode_preview: size must be >= 8");
    }
    z.validate();
    // fixed channel mix, front-loaded on the leading channels
    Grid2D gray(z.h, z.w);
    const size_t plane = static_cast<size_t>(z.h) * z.w;
    double weight_sum = 0.0;
    for (int c = 0; c < z.channels; ++c) weight_sum += 1.0 / (1.0 + c);
    for (size_t i = 0; i < plane; ++i) {
        double acc = 0.0;
        for (int c = 0; c < z.channels; ++c) {
            acc += z.values[static_cast<size_t>(c) * plane + i] / (1.0 + c);
        }
        gray.values[i] = acc / weight_sum;
    }
    gray.values = minmax_normalize(gray.values, 1e-8);
    return bilinear_upsample(gray, size, size);
}

std::vector<LatentState> background_trajectory(const TextEmbedding& bg_text,
                                               const TextEmbedding& uncond_text, uint64_t seed,
                                               double cfg_scale, const NoiseSchedule& sched,
                                               const Backbone& backbone) {
    const int T = sched.steps();
    LatentState z = gaussian_latent(backbone.latent_channels(), backbone.latent_h(),
                                    backbone.latent_w(), T, seed);
    const std::vector<double> unit_cond(static_cast<size_t>(bg_text.token_count()), 1.0);
    const std::vector<double> unit_uncond(static_cast<size_t>(uncond_text.token_count()), 1.0);

    std::vector<LatentState> trajectory;
    trajectory.reserve(static_cast<size_t>(T));
    for (int i = 0; i < T; ++i) {
        const int t = T - i;
        const auto pred_u = backbone.predict(z, t, uncond_text, unit_uncond);
        const auto pred_c = backbone.predict(z, t, bg_text, unit_cond);
        const auto eps = cfg_combine(pred_u.eps, pred_c.eps, cfg_scale);
        z = scheduler_step(z, eps, t, sched);
        trajectory.push_back(z);
    }
    return trajectory;
}

LatentState gaussian_latent(int channels, int h, int w, int T, uint64_t seed) {
    LatentState z(channels, h, w, T);
    GaussianRng rng(seed);
    for (auto& v : z.values) v = rng.next();
    return z;
}

std::vector<std::string> tokenize_prompt(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

TextEmbedding embed_text(const std::string& text, int dim, int max_tokens, uint64_t seed) {
    if (dim < 1 || max_tokens < 1) {
        throw std::invalid_argument("embed_text: invalid dims");
    }
    TextEmbedding emb;
    emb.dim = dim;
    emb.tokens = tokenize_prompt(text);
    if (emb.tokens.empty()) {
        emb.tokens.push_back("<uncond>");
    }
    if (static_cast<int>(emb.tokens.size()) > max_tokens) {
        emb.tokens.resize(static_cast<size_t>(max_tokens));
    }
    emb.vectors.reserve(emb.tokens.size() * static_cast<size_t>(dim));
    for (const auto& tok : emb.tokens) {
        GaussianRng rng(sub_seed(seed, tok));
        for (int i = 0; i < dim; ++i) emb.vectors.push_back(rng.next());
    }
    return emb;
}

}  // namespace obc

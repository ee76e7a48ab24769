#include "obcomp/config.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace obc {

using nlohmann::json;

namespace {

// gating windows default to the projection boundary unless set explicitly
struct PendingGating {
    std::optional<double> r_bg_end;
    std::optional<double> r_obj_end;
};

[[noreturn]] void fail(const std::string& key, const std::string& reason) {
    throw ConfigError("config error: " + key + ": " + reason);
}

double as_number(const json& v, const std::string& key) {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) fail(key, "expected a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
}

void apply_section(AppConfig& cfg, PendingGating& pending, const std::string& section,
                   const std::string& key, const json& value) {
    const std::string full = section + "." + key;
    if (section == "run") {
        if (key == "steps") cfg.run.steps = as_int(value, full);
        else if (key == "paths") cfg.run.paths = as_int(value, full);
        else if (key == "interval") cfg.run.prune.interval = as_int(value, full);
        else if (key == "cfg_scale") cfg.run.cfg_scale = as_number(value, full);
        else if (key == "seed") cfg.run.seed = static_cast<uint64_t>(as_int(value, full));
        else if (key == "preview_size") cfg.run.preview_size = as_int(value, full);
        else if (key == "output_size") cfg.run.output_size = as_int(value, full);
        else if (key == "out_dir") cfg.out_dir = as_string(value, full);
        else if (key == "backbone") cfg.backbone = as_string(value, full);
        else if (key == "dump_latents") cfg.dump_latents = as_bool(value, full);
        else fail(full, "unknown key");
    } else if (section == "geometry") {
        if (key == "channels") cfg.run.geometry.channels = as_int(value, full);
        else if (key == "latent_h") cfg.run.geometry.latent_h = as_int(value, full);
        else if (key == "latent_w") cfg.run.geometry.latent_w = as_int(value, full);
        else if (key == "d_text") cfg.run.geometry.d_text = as_int(value, full);
        else if (key == "d_attn") cfg.run.geometry.d_attn = as_int(value, full);
        else if (key == "max_tokens") cfg.run.geometry.max_tokens = as_int(value, full);
        else fail(full, "unknown key");
    } else if (section == "projection") {
        if (key == "lambda") cfg.run.projection.lambda_max = as_number(value, full);
        else if (key == "r_max") cfg.run.projection.r_max = as_number(value, full);
        else fail(full, "unknown key");
    } else if (section == "gating") {
        if (key == "gamma_max") cfg.run.gating.gamma_max = as_number(value, full);
        else if (key == "r_bg_end") pending.r_bg_end = as_number(value, full);
        else if (key == "r_obj_end") pending.r_obj_end = as_number(value, full);
        else if (key == "favored_gain") cfg.run.gating.gain_favored = as_number(value, full);
        else if (key == "disfavored_gain") cfg.run.gating.gain_disfavored = as_number(value, full);
        else fail(full, "unknown key");
    } else if (section == "mask") {
        if (key == "tau") cfg.run.mask_tau = as_number(value, full);
        else if (key == "smooth_iters") cfg.run.mask_smooth_iters = as_int(value, full);
        else if (key == "eps") cfg.run.mask_eps = as_number(value, full);
        else if (key == "align_corners") cfg.run.mask_align_corners = as_bool(value, full);
        else if (key == "match_mode") {
            const std::string mode = as_string(value, full);
            if (mode == "whole_word") cfg.run.match_mode = MatchMode::whole_word;
            else if (mode == "subword_prefix") cfg.run.match_mode = MatchMode::subword_prefix;
            else fail(full, "expected 'whole_word' or 'subword_prefix'");
        } else fail(full, "unknown key");
    } else if (section == "pruning") {
        if (key == "w_tail") cfg.run.prune.w_tail = as_number(value, full);
        else if (key == "w_clip") cfg.run.prune.w_clip = as_number(value, full);
        else if (key == "q") cfg.run.prune.q = as_number(value, full);
        else if (key == "tail_fraction") cfg.run.prune.tail_fraction = as_number(value, full);
        else if (key == "min_live") cfg.run.prune.min_live = as_int(value, full);
        else if (key == "min_len") cfg.run.prune.min_len = as_int(value, full);
        else if (key == "tail_direction") {
            const std::string dir = as_string(value, full);
            if (dir == "descending") cfg.run.prune.tail_direction = TailDirection::descending;
            else if (dir == "ascending") cfg.run.prune.tail_direction = TailDirection::ascending;
            else fail(full, "expected 'descending' or 'ascending'");
        } else fail(full, "unknown key");
    } else if (section == "provider") {
        if (key == "mode") cfg.provider.mode = as_string(value, full);
        else if (key == "dim") cfg.provider.dim = as_int(value, full);
        else if (key == "host") cfg.provider.host = as_string(value, full);
        else if (key == "port") cfg.provider.port = as_int(value, full);
        else if (key == "path_prefix") cfg.provider.path_prefix = as_string(value, full);
        else if (key == "fixture") cfg.provider.fixture = as_string(value, full);
        else fail(full, "unknown key");
    } else if (section == "agent") {
        if (key == "mode") cfg.agent.mode = as_string(value, full);
        else if (key == "host") cfg.agent.host = as_string(value, full);
        else if (key == "port") cfg.agent.port = as_int(value, full);
        else if (key == "path") cfg.agent.path = as_string(value, full);
        else if (key == "model") cfg.agent.model = as_string(value, full);
        else if (key == "fixture") cfg.agent.fixture = as_string(value, full);
        else if (key == "api_key_env") cfg.agent.api_key_env = as_string(value, full);
        else if (key == "record") cfg.agent.record = as_string(value, full);
        else fail(full, "unknown key");
    } else if (section == "decomposer") {
        if (key == "template_path") cfg.decomposer.template_path = as_string(value, full);
        else if (key == "word_boundary") cfg.decomposer.word_boundary = as_bool(value, full);
        else fail(full, "unknown key");
    } else if (section == "bench") {
        if (key == "knn_k") cfg.bench.knn_k = as_int(value, full);
        else if (key == "eta") cfg.bench.eta = as_number(value, full);
        else if (key == "embedding_dim") cfg.bench.embedding_dim = as_int(value, full);
        else if (key == "corpus") cfg.bench.corpus = as_string(value, full);
        else if (key == "corpus_format") cfg.bench.corpus_format = as_string(value, full);
        else if (key == "embeddings") cfg.bench.embeddings = as_string(value, full);
        else if (key == "lexicon") cfg.bench.lexicon = as_string(value, full);
        else if (key == "foregrounds") cfg.bench.foregrounds = as_string(value, full);
        else if (key == "synth_template") cfg.bench.synth_template = as_string(value, full);
        else if (key == "out_clusters") cfg.bench.out_clusters = as_string(value, full);
        else if (key == "out_pairs") cfg.bench.out_pairs = as_string(value, full);
        else if (key == "out_benchmark") cfg.bench.out_benchmark = as_string(value, full);
        else fail(full, "unknown key");
    } else if (section == "metrics") {
        if (key == "tau_det") cfg.metrics.tau_det = as_number(value, full);
        else if (key == "detections") cfg.metrics.detections = as_string(value, full);
        else if (key == "embeddings") cfg.metrics.embeddings = as_string(value, full);
        else if (key == "bench") cfg.metrics.bench = as_string(value, full);
        else if (key == "report") cfg.metrics.report = as_string(value, full);
        else fail(full, "unknown key");
    } else {
        fail(section, "unknown section");
    }
}

void validate(const AppConfig& cfg) {
    try {
        cfg.run.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    if (cfg.run.prune.q < 0.0 || cfg.run.prune.q > 1.0) {
        throw ConfigError("config error: pruning.q outside [0,1]");
    }
    if (cfg.metrics.tau_det < 0.0 || cfg.metrics.tau_det > 1.0) {
        throw ConfigError("config error: metrics.tau_det outside [0,1]");
    }
    if (cfg.bench.knn_k < 1) {
        throw ConfigError("config error: bench.knn_k must be >= 1");
    }
    if (cfg.bench.eta < -1.0 || cfg.bench.eta > 1.0) {
        throw ConfigError("config error: bench.eta outside [-1,1]");
    }
    if (cfg.provider.mode != "hash" && cfg.provider.mode != "http" &&
        cfg.provider.mode != "replay") {
        throw ConfigError("config error: provider.mode must be hash, http, or replay");
    }
    if (cfg.agent.mode != "none" && cfg.agent.mode != "http" && cfg.agent.mode != "replay") {
        throw ConfigError("config error: agent.mode must be none, http, or replay");
    }
    if (cfg.bench.corpus_format != "tsv" && cfg.bench.corpus_format != "plain") {
        throw ConfigError("config error: bench.corpus_format must be tsv or plain");
    }
}

json parse_override_value(const std::string& raw) {
    const json parsed = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && (parsed.is_number() || parsed.is_boolean())) {
        return parsed;
    }
    return json(raw);  // everything else is a string
}

}  // namespace

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    AppConfig cfg;
    cfg.run.projection.T = cfg.run.steps;
    PendingGating pending;

    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) {
            throw ConfigError("config error: cannot open " + path);
        }
        std::stringstream buffer;
        buffer << f.rdbuf();
        const std::string text = buffer.str();
        const bool only_space =
            text.find_first_not_of(" \t\r\n") == std::string::npos;
        if (!only_space) {
            const json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
            if (j.is_discarded() || !j.is_object()) {
                throw ConfigError("config error: " + path + " is not a JSON object");
            }
            for (const auto& [section, body] : j.items()) {
                if (!body.is_object()) {
                    throw ConfigError("config error: section '" + section +
                                      "' must be an object");
                }
                for (const auto& [key, value] : body.items()) {
                    apply_section(cfg, pending, section, key, value);
                }
            }
        }
    }

    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        const size_t dot = ov.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
            throw ConfigError("config error: override must look like section.key=value: " + ov);
        }
        const std::string section = ov.substr(0, dot);
        const std::string key = ov.substr(dot + 1, eq - dot - 1);
        apply_section(cfg, pending, section, key, parse_override_value(ov.substr(eq + 1)));
    }

    cfg.run.projection.T = cfg.run.steps;
    cfg.run.gating.r_bg_end = pending.r_bg_end.value_or(cfg.run.projection.r_max);
    cfg.run.gating.r_obj_end = pending.r_obj_end.value_or(2.0 * cfg.run.projection.r_max);

    validate(cfg);
    return cfg;
}

}  // namespace obc

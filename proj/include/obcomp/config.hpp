#pragma once

#include <string>
#include <vector>

#include "obcomp/sampler.hpp"

namespace obc {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ProviderConfig {
    std::string mode = "hash";  // hash | http | replay
    int dim = 64;
    std::string host = "127.0.0.1";
    int port = 8000;
    std::string path_prefix;
    std::string fixture;
};

struct AgentConfig {
    std::string mode = "none";  // none | http | replay
    std::string host = "127.0.0.1";
    int port = 8001;
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string fixture;
    std::string api_key_env = "OBCOMP_AGENT_KEY";
    std::string record;  // when set, exchanges are captured here
};

struct DecomposerConfig {
    std::string template_path = "config/templates/decomposer_agent.txt";
    bool word_boundary = false;
};

struct BenchConfig {
    int knn_k = 10;
    double eta = 0.5;
    int embedding_dim = 64;
    std::string corpus;
    std::string corpus_format = "tsv";  // tsv | plain
    std::string embeddings;             // optional word-vector file
    std::string lexicon;                // noun lexicon for plain corpora
    std::string foregrounds;
    std::string synth_template = "config/templates/synthesis_agent.txt";
    std::string out_clusters = "clusters.json";
    std::string out_pairs = "pairs.jsonl";
    std::string out_benchmark = "benchmark.jsonl";
};

struct MetricsConfig {
    double tau_det = 0.25;
    std::string detections;
    std::string embeddings;
    std::string bench;
    std::string report = "metrics_report.json";
};

struct AppConfig {
    RunConfig run;                 // sampling stack, paper defaults
    std::string backbone = "toy";  // toy | fixture:<eps>:<attention>
    std::string out_dir = "out";
    bool dump_latents = false;
    ProviderConfig provider;
    AgentConfig agent;
    DecomposerConfig decomposer;
    BenchConfig bench;
    MetricsConfig metrics;
};

/// Defaults <- config file (JSON, sections per module) <- --set overrides.
/// Unknown sections/keys and invariant violations raise ConfigError naming
/// the offending key. An empty path or empty file yields pure defaults.
AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace obc

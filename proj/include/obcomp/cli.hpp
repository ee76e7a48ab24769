#pragma once

#include <memory>
#include <string>

#include "obcomp/config.hpp"
#include "obcomp/decomposer.hpp"

namespace obc {

struct CliOptions {
    std::string verb;
    std::string prompt;          // decompose, sample, inspect-masks
    std::string decomposition;   // path to a decomposition JSON
    std::string out;             // decompose: output path ("" -> stdout)
    int inspect_path_id = 0;     // inspect-masks: which path seed offset
};

// exit codes: 0 success, 1 fatal error, 2 usage error
int dispatch(const CliOptions& opts, const AppConfig& cfg);

// factories shared by the verbs and the tests
std::unique_ptr<AgentClient> make_agent_client(const AgentConfig& cfg);
std::unique_ptr<AlignmentProvider> make_alignment_provider(const ProviderConfig& cfg,
                                                           uint64_t seed);
std::unique_ptr<Backbone> make_backbone(const std::string& spec, const ToyGeometry& geom,
                                        uint64_t seed);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

nlohmann::json decomposition_to_json(const Decomposition& d);
Decomposition load_decomposition(const std::string& path);

int run_decompose(const CliOptions& opts, const AppConfig& cfg);
int run_build_bench(const AppConfig& cfg);
int run_sample(const CliOptions& opts, const AppConfig& cfg);
int run_evaluate(const AppConfig& cfg);
int run_inspect_masks(const CliOptions& opts, const AppConfig& cfg);

}  // namespace obc

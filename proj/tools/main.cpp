#include <iostream>

#include <CLI11.hpp>

#include "obcomp/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"obcomp: multi-path object-background compositional sampler"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "JSON config file (empty: built-in defaults)");
    app.add_option("--set", overrides, "override config values, section.key=value")
        ->take_all();

    obc::CliOptions opts;

    auto* decompose = app.add_subcommand("decompose", "split a prompt via the decomposer agent");
    decompose->add_option("--prompt", opts.prompt, "two-sentence composition")->required();
    decompose->add_option("--out", opts.out, "output JSON path (default stdout)");

    app.add_subcommand("build-bench", "construct the scene-cluster benchmark");

    auto* sample = app.add_subcommand("sample", "run multi-path guided sampling");
    sample->add_option("--prompt", opts.prompt, "freeform prompt (decomposed when an agent is configured)");
    sample->add_option("--decomposition", opts.decomposition, "decomposition JSON file");

    app.add_subcommand("evaluate", "score detections/embeddings against a benchmark");

    auto* inspect = app.add_subcommand("inspect-masks", "dump per-step background masks");
    inspect->add_option("--prompt", opts.prompt, "freeform prompt");
    inspect->add_option("--decomposition", opts.decomposition, "decomposition JSON file");
    inspect->add_option("--path-id", opts.inspect_path_id, "path seed offset (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    opts.verb = app.get_subcommands().front()->get_name();

    try {
        const obc::AppConfig cfg = obc::load_config(config_path, overrides);
        return obc::dispatch(opts, cfg);
    } catch (const obc::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

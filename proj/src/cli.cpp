#include "obcomp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "obcomp/benchbuild.hpp"
#include "obcomp/image.hpp"
#include "obcomp/metrics.hpp"
#include "obcomp/rng.hpp"
#include "obcomp/tensor_io.hpp"

namespace obc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    std::stringstream buffer;
    buffer << f.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << text;
}

std::unique_ptr<AgentClient> make_agent_client(const AgentConfig& cfg) {
    if (cfg.mode == "http") {
        auto client = std::make_unique<HttpAgentClient>(cfg.host, cfg.port, cfg.path, cfg.model,
                                                        cfg.api_key_env);
        return client;
    }
    if (cfg.mode == "replay") {
        if (cfg.fixture.empty()) {
            throw std::runtime_error("agent.mode=replay requires agent.fixture");
        }
        return std::make_unique<ReplayAgentClient>(cfg.fixture);
    }
    return nullptr;  // mode == none
}

std::unique_ptr<AlignmentProvider> make_alignment_provider(const ProviderConfig& cfg,
                                                           uint64_t seed) {
    if (cfg.mode == "hash") {
        return std::make_unique<HashAlignmentProvider>(cfg.dim, sub_seed(seed, "provider"));
    }
    if (cfg.mode == "http") {
        return std::make_unique<HttpAlignmentProvider>(cfg.host, cfg.port, cfg.path_prefix);
    }
    if (cfg.fixture.empty()) {
        throw std::runtime_error("provider.mode=replay requires provider.fixture");
    }
    return std::make_unique<ReplayAlignmentProvider>(cfg.fixture);
}

std::unique_ptr<Backbone> make_backbone(const std::string& spec, const ToyGeometry& geom,
                                        uint64_t seed) {
    if (spec == "toy") {
        return std::make_unique<ToyDenoiser>(geom, sub_seed(seed, "backbone"));
    }
    // fixture:<eps path>:<attention path>
    if (spec.rfind("fixture:", 0) == 0) {
        const std::string rest = spec.substr(8);
        const size_t sep = rest.find(':');
        if (sep == std::string::npos) {
            throw std::runtime_error("backbone fixture spec needs fixture:<eps>:<attention>");
        }
        return std::make_unique<FixtureBackbone>(rest.substr(0, sep), rest.substr(sep + 1));
    }
    throw std::runtime_error("unknown backbone: " + spec);
}

json decomposition_to_json(const Decomposition& d) {
    return json{{"background_sentence", d.background_sentence},
                {"object_sentence", d.object_sentence},
                {"object_nouns", d.object_nouns},
                {"background_nouns", d.background_nouns}};
}

Decomposition load_decomposition(const std::string& path) {
    const auto parsed = parse_decomposition(read_text_file(path));
    if (!parsed) {
        throw std::runtime_error("decomposition file " + path +
                                 " does not match the strict four-key schema");
    }
    return *parsed;
}

namespace {

Decomposition resolve_decomposition(const CliOptions& opts, const AppConfig& cfg) {
    if (!opts.decomposition.empty()) {
        return load_decomposition(opts.decomposition);
    }
    if (opts.prompt.empty()) {
        throw std::runtime_error("need --prompt or --decomposition");
    }
    const auto client = make_agent_client(cfg.agent);
    if (!client) {
        // no agent: condition on the raw prompt, masks fall back to global
        std::cerr << "warning: agent.mode=none, sampling without a decomposition\n";
        Decomposition d;
        d.object_sentence = opts.prompt;
        return d;
    }
    DecomposeOptions options;
    options.system_prompt = read_text_file(cfg.decomposer.template_path);
    options.word_boundary = cfg.decomposer.word_boundary;
    return decompose_prompt(opts.prompt, *client, options);
}

std::string path_join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

}  // namespace

int run_decompose(const CliOptions& opts, const AppConfig& cfg) {
    if (opts.prompt.empty()) {
        std::cerr << "decompose: --prompt is required\n";
        return 2;
    }
    const auto client = make_agent_client(cfg.agent);
    if (!client) {
        std::cerr << "decompose: agent.mode=none; configure http or replay\n";
        return 1;
    }
    DecomposeOptions options;
    options.system_prompt = read_text_file(cfg.decomposer.template_path);
    options.word_boundary = cfg.decomposer.word_boundary;

    Decomposition result;
    if (!cfg.agent.record.empty()) {
        RecordingAgentClient recorder(*client, cfg.agent.record);
        result = decompose_prompt(opts.prompt, recorder, options);
    } else {
        result = decompose_prompt(opts.prompt, *client, options);
    }
    const std::string text = decomposition_to_json(result).dump(2) + "\n";
    if (opts.out.empty()) {
        std::cout << text;
    } else {
        write_text_file(opts.out, text);
    }
    if (result.empty()) {
        std::cerr << "warning: all candidates invalid, wrote the empty fallback\n";
    }
    return 0;
}

int run_build_bench(const AppConfig& cfg) {
    if (cfg.bench.corpus.empty()) {
        std::cerr << "build-bench: bench.corpus is required\n";
        return 2;
    }
    std::vector<std::string> vocab;
    if (cfg.bench.corpus_format == "tsv") {
        vocab = extract_noun_vocab(load_tagged_tsv(cfg.bench.corpus));
    } else {
        if (cfg.bench.lexicon.empty()) {
            std::cerr << "build-bench: plain corpora need bench.lexicon\n";
            return 2;
        }
        std::vector<std::string> lexicon;
        std::istringstream lex(read_text_file(cfg.bench.lexicon));
        std::string word;
        while (lex >> word) lexicon.push_back(word);
        vocab = extract_noun_vocab_plain(read_text_file(cfg.bench.corpus), lexicon);
    }
    if (vocab.empty()) {
        std::cerr << "build-bench: no nouns extracted from " << cfg.bench.corpus << "\n";
        return 1;
    }
    std::cerr << "vocabulary: " << vocab.size() << " nouns\n";

    EmbeddingTable table;
    if (!cfg.bench.embeddings.empty()) {
        const EmbeddingTable file_table = EmbeddingTable::load_file(cfg.bench.embeddings);
        for (const auto& word : vocab) {
            const auto it = file_table.index.find(word);
            if (it == file_table.index.end()) {
                std::cerr << "warning: no embedding for '" << word << "', skipping\n";
                continue;
            }
            table.add(word, file_table.vectors[static_cast<size_t>(it->second)]);
        }
    } else {
        table = EmbeddingTable::hashed(vocab, cfg.bench.embedding_dim,
                                       sub_seed(cfg.run.seed, "bench-embed"));
    }

    const KnnGraph graph = build_knn_graph(table, cfg.bench.knn_k, cfg.bench.eta);
    const auto clusters =
        louvain_partition(graph, table, sub_seed(cfg.run.seed, "louvain"));
    std::cerr << "clusters: " << clusters.size() << "\n";

    fs::create_directories(cfg.out_dir);
    json jclusters = json::array();
    std::vector<int> partition(static_cast<size_t>(graph.n), 0);
    for (size_t c = 0; c < clusters.size(); ++c) {
        json members = json::array(), reps = json::array();
        for (int i : clusters[c].members) {
            members.push_back(table.words[static_cast<size_t>(i)]);
            partition[static_cast<size_t>(i)] = static_cast<int>(c);
        }
        for (int i : clusters[c].representatives) {
            reps.push_back(table.words[static_cast<size_t>(i)]);
        }
        jclusters.push_back(json{{"id", c},
                                 {"members", members},
                                 {"centroid", clusters[c].centroid},
                                 {"representatives", reps}});
    }
    const double q = modularity(graph, partition);
    write_text_file(path_join(cfg.out_dir, cfg.bench.out_clusters),
                    json{{"modularity", q}, {"clusters", jclusters}}.dump(2) + "\n");

    if (cfg.bench.foregrounds.empty()) {
        std::cerr << "build-bench: no foregrounds file, stopping after clusters\n";
        return 0;
    }
    std::vector<std::string> foregrounds;
    {
        std::istringstream fg(read_text_file(cfg.bench.foregrounds));
        std::string line;
        while (std::getline(fg, line)) {
            if (!line.empty()) foregrounds.push_back(line);
        }
    }
    auto pairs = make_prompt_pairs(clusters, table, foregrounds, cfg.run.seed);

    const auto client = make_agent_client(cfg.agent);
    if (client) {
        const std::string system_prompt = read_text_file(cfg.bench.synth_template);
        if (!cfg.agent.record.empty()) {
            RecordingAgentClient recorder(*client, cfg.agent.record);
            synthesize_prompts(pairs, recorder, system_prompt);
        } else {
            synthesize_prompts(pairs, *client, system_prompt);
        }
    } else {
        std::cerr << "build-bench: agent.mode=none, skipping prompt synthesis\n";
    }

    auto status_name = [](PairStatus s) {
        switch (s) {
            case PairStatus::ok: return "ok";
            case PairStatus::bad_format: return "bad_format";
            case PairStatus::failed: return "failed";
            default: return "pending";
        }
    };
    std::ostringstream pairs_out, bench_out;
    for (const auto& pair : pairs) {
        json row{{"cluster_id", pair.cluster_id},
                 {"bg_chunk", pair.bg_chunk},
                 {"fg_entity", pair.fg_entity},
                 {"status", status_name(pair.status)}};
        if (pair.prompt) row["prompt"] = *pair.prompt;
        pairs_out << row.dump() << "\n";
        if (pair.status == PairStatus::ok) {
            bench_out << json{{"prompt", *pair.prompt},
                              {"bg_nouns", pair.bg_chunk},
                              {"fg_entity", pair.fg_entity},
                              {"cluster_id", pair.cluster_id}}
                             .dump()
                      << "\n";
        }
    }
    write_text_file(path_join(cfg.out_dir, cfg.bench.out_pairs), pairs_out.str());
    if (client) {
        write_text_file(path_join(cfg.out_dir, cfg.bench.out_benchmark), bench_out.str());
    }
    return 0;
}

int run_sample(const CliOptions& opts, const AppConfig& cfg) {
    const Decomposition decomposition = resolve_decomposition(opts, cfg);
    const auto backbone = make_backbone(cfg.backbone, cfg.run.geometry, cfg.run.seed);
    const auto provider = make_alignment_provider(cfg.provider, cfg.run.seed);

    const RunResult result = run_sampling(cfg.run, decomposition, *backbone, *provider);

    fs::create_directories(cfg.out_dir);
    for (size_t i = 0; i < result.images.size(); ++i) {
        const int id = result.image_path_ids[i];
        write_png(result.images[i], path_join(cfg.out_dir, "path_" + std::to_string(id) + ".png"));
        if (cfg.dump_latents) {
            const LatentState& z = result.final_latents[i];
            TensorFile t;
            t.shape = {static_cast<uint32_t>(z.channels), static_cast<uint32_t>(z.h),
                       static_cast<uint32_t>(z.w)};
            t.data = z.values;
            write_tensor(t, path_join(cfg.out_dir, "latent_" + std::to_string(id) + ".bin"));
        }
    }
    json report = result.report.to_json();
    report["decomposition"] = decomposition_to_json(decomposition);
    write_text_file(path_join(cfg.out_dir, "report.json"), report.dump(2) + "\n");
    std::cerr << "sample: " << result.images.size() << " surviving path(s), report in "
              << cfg.out_dir << "\n";
    return 0;
}

int run_evaluate(const AppConfig& cfg) {
    if (cfg.metrics.detections.empty() || cfg.metrics.bench.empty()) {
        std::cerr << "evaluate: metrics.detections and metrics.bench are required\n";
        return 2;
    }
    // benchmark rows keyed by explicit id or line number
    std::map<std::string, json> bench_rows;
    {
        std::istringstream in(read_text_file(cfg.metrics.bench));
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json row = json::parse(line);
            const std::string id =
                row.contains("id") ? row["id"].get<std::string>() : std::to_string(line_no);
            bench_rows[id] = row;
            ++line_no;
        }
    }

    std::map<std::string, json> embedding_rows;
    if (!cfg.metrics.embeddings.empty()) {
        const json j = json::parse(read_text_file(cfg.metrics.embeddings));
        for (const auto& row : j) {
            embedding_rows[row.at("image_id").get<std::string>()] = row;
        }
    }

    const json detections = json::parse(read_text_file(cfg.metrics.detections));
    json per_image = json::array();
    double recall_sum = 0.0, diversity_sum = 0.0, idsim_sum = 0.0;
    int recall_n = 0, diversity_n = 0, idsim_n = 0;

    for (const auto& entry : detections) {
        const std::string image_id = entry.at("image_id").get<std::string>();
        const auto bench_it = bench_rows.find(image_id);
        if (bench_it == bench_rows.end()) {
            std::cerr << "warning: no benchmark row for image " << image_id << "\n";
            continue;
        }
        std::vector<std::string> nouns =
            bench_it->second.at("bg_nouns").get<std::vector<std::string>>();
        nouns.push_back(bench_it->second.at("fg_entity").get<std::string>());

        DetectionResult det;
        for (const auto& [noun, boxes] : entry.at("detections").items()) {
            for (const auto& b : boxes) {
                Detection d;
                d.conf = b.at("conf").get<double>();
                if (b.contains("box")) {
                    const auto box = b["box"].get<std::vector<double>>();
                    for (size_t i = 0; i < std::min<size_t>(4, box.size()); ++i) d.box[i] = box[i];
                }
                det[noun].push_back(d);
            }
        }
        const double recall = noun_recall(nouns, det, cfg.metrics.tau_det);
        recall_sum += recall;
        ++recall_n;
        json row{{"image_id", image_id}, {"noun_recall", recall}};

        const auto emb_it = embedding_rows.find(image_id);
        if (emb_it != embedding_rows.end()) {
            const json& emb = emb_it->second;
            if (emb.contains("caption_embeddings")) {
                const auto caps =
                    emb["caption_embeddings"].get<std::vector<std::vector<double>>>();
                if (caps.size() >= 2) {
                    const double div = caption_diversity(caps);
                    diversity_sum += div;
                    ++diversity_n;
                    row["caption_diversity"] = div;
                }
            }
            if (emb.contains("face_embedding")) {
                const json& face = emb["face_embedding"];
                std::optional<std::vector<double>> ref, gen;
                if (face.contains("reference") && !face["reference"].is_null()) {
                    ref = face["reference"].get<std::vector<double>>();
                }
                if (face.contains("generated") && !face["generated"].is_null()) {
                    gen = face["generated"].get<std::vector<double>>();
                }
                const double idsim = identity_similarity(ref, gen);
                idsim_sum += idsim;
                ++idsim_n;
                row["id_sim"] = idsim;
            }
        }
        per_image.push_back(row);
    }

    json global;
    if (recall_n) global["noun_recall"] = recall_sum / recall_n;
    if (diversity_n) global["caption_diversity"] = diversity_sum / diversity_n;
    if (idsim_n) global["id_sim"] = idsim_sum / idsim_n;
    const json report{{"per_image", per_image}, {"global", global}};

    fs::create_directories(fs::path(path_join(cfg.out_dir, cfg.metrics.report)).parent_path());
    write_text_file(path_join(cfg.out_dir, cfg.metrics.report), report.dump(2) + "\n");
    std::cout << report["global"].dump(2) << "\n";
    return 0;
}

int run_inspect_masks(const CliOptions& opts, const AppConfig& cfg) {
    const Decomposition decomposition = resolve_decomposition(opts, cfg);
    const auto backbone = make_backbone(cfg.backbone, cfg.run.geometry, cfg.run.seed);

    RunConfig run = cfg.run;
    run.paths = 1;
    run.seed = cfg.run.seed + static_cast<uint64_t>(opts.inspect_path_id);
    auto paths = init_paths(run, decomposition, *backbone);
    PathState& path = paths[0];

    const NoiseSchedule sched = NoiseSchedule::linear_beta(run.steps);
    const uint64_t text_seed = sub_seed(run.seed, "text");
    const std::string prompt = decomposition.background_sentence.empty()
                                   ? decomposition.object_sentence
                                   : decomposition.background_sentence + " " +
                                         decomposition.object_sentence;
    const TextEmbedding cond =
        embed_text(prompt, run.geometry.d_text, run.geometry.max_tokens, text_seed);
    const TextEmbedding uncond =
        embed_text("", run.geometry.d_text, run.geometry.max_tokens, text_seed);
    const std::vector<double> unit_cond(static_cast<size_t>(cond.token_count()), 1.0);
    const std::vector<double> unit_uncond(static_cast<size_t>(uncond.token_count()), 1.0);
    const TokenGroups groups = match_token_groups(cond.tokens, decomposition.object_nouns,
                                                  decomposition.background_nouns, run.match_mode);

    const std::string mask_dir = path_join(cfg.out_dir, "masks");
    fs::create_directories(mask_dir);
    json sidecar = json::array();

    for (int i = 0; i < run.steps; ++i) {
        const int t = run.steps - i;
        const auto pred_u = backbone->predict(path.latent, t, uncond, unit_uncond);
        const auto pred_c = backbone->predict(path.latent, t, cond, unit_cond);
        const auto eps = cfg_combine(pred_u.eps, pred_c.eps, run.cfg_scale);
        path.latent = scheduler_step(path.latent, eps, t, sched);

        SoftMask soft(path.latent.h, path.latent.w, 1.0);
        if (!groups.bg.empty()) {
            soft = compute_soft_mask(pred_c.records, groups.bg, path.latent.h, path.latent.w,
                                     run.mask_eps, run.mask_align_corners)[0];
        } else if (!groups.obj.empty()) {
            soft = complement_mask(compute_soft_mask(pred_c.records, groups.obj, path.latent.h,
                                                     path.latent.w, run.mask_eps,
                                                     run.mask_align_corners)[0]);
        }
        const SoftMask gated = gate_mask(soft, run.mask_tau, run.mask_smooth_iters);

        char name[64];
        std::snprintf(name, sizeof(name), "step_%03d_soft.pgm", i);
        write_pgm(soft, path_join(mask_dir, name));
        const std::string soft_name = name;
        std::snprintf(name, sizeof(name), "step_%03d_gated.pgm", i);
        write_pgm(gated, path_join(mask_dir, name));

        json layers = json::array();
        for (const auto& rec : pred_c.records) layers.push_back(rec.layer_id);
        sidecar.push_back(json{{"step", i},
                               {"timestep", t},
                               {"layer_ids", layers},
                               {"soft", soft_name},
                               {"gated", name}});
    }
    write_text_file(path_join(mask_dir, "masks.json"), sidecar.dump(2) + "\n");
    std::cerr << "inspect-masks: wrote " << run.steps << " steps to " << mask_dir << "\n";
    return 0;
}

int dispatch(const CliOptions& opts, const AppConfig& cfg) {
    try {
        if (opts.verb == "decompose") return run_decompose(opts, cfg);
        if (opts.verb == "build-bench") return run_build_bench(cfg);
        if (opts.verb == "sample") return run_sample(opts, cfg);
        if (opts.verb == "evaluate") return run_evaluate(cfg);
        if (opts.verb == "inspect-masks") return run_inspect_masks(opts, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "unknown verb: " << opts.verb << "\n";
    return 2;
}

}  // namespace obc

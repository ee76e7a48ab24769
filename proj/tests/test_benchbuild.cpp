#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "obcomp/benchbuild.hpp"
#include "oracles.hpp"

using namespace obc;

namespace {

KnnGraph graph_from_dense(const oracle::DenseGraph& g) {
    KnnGraph out;
    out.n = g.n;
    out.adj.assign(static_cast<size_t>(g.n), {});
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (g.w[i][j] > 0.0) out.adj[static_cast<size_t>(i)].emplace_back(j, g.w[i][j]);
        }
    }
    return out;
}

oracle::DenseGraph two_triangles() {
    oracle::DenseGraph g(6);
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 2, 1.0);
    g.add_edge(0, 2, 1.0);
    g.add_edge(3, 4, 1.0);
    g.add_edge(4, 5, 1.0);
    g.add_edge(3, 5, 1.0);
    return g;
}

std::vector<int> membership_of(const std::vector<std::vector<int>>& communities, int n) {
    std::vector<int> m(static_cast<size_t>(n), -1);
    for (size_t c = 0; c < communities.size(); ++c) {
        for (int i : communities[c]) m[static_cast<size_t>(i)] = static_cast<int>(c);
    }
    return m;
}

}  // namespace

TEST_CASE("extract_noun_vocab filters, folds case, dedupes, sorts") {
    CHECK(extract_noun_vocab({{"the", "DET"}, {"dog", "NOUN"}, {"runs", "VERB"}}) ==
          std::vector<std::string>{"dog"});
    CHECK(extract_noun_vocab({{"Dog", "NOUN"}, {"dog", "NOUN"}}) ==
          std::vector<std::string>{"dog"});
    const auto vocab = extract_noun_vocab({{"Paris", "PROPN"},
                                           {"visits", "VERB"},
                                           {"museum", "NOUN"},
                                           {"beautiful", "ADJ"},
                                           {"art", "NOUN"},
                                           {"quickly", "ADV"},
                                           {"Louvre", "PROPN"},
                                           {"in", "ADP"},
                                           {"crowd", "NOUN"},
                                           {"sees", "VERB"}});
    CHECK(vocab == std::vector<std::string>{"art", "crowd", "louvre", "museum", "paris"});
}

TEST_CASE("plain corpus fallback keeps only lexicon words") {
    const auto vocab = extract_noun_vocab_plain("The dog chased a ball near the harbor wall.",
                                                {"dog", "ball", "harbor", "wall", "cat"});
    CHECK(vocab == std::vector<std::string>{"ball", "dog", "harbor", "wall"});
}

TEST_CASE("embedding tables normalize rows on load") {
    EmbeddingTable t;
    t.add("a", {3.0, 4.0});
    CHECK(t.vectors[0][0] == doctest::Approx(0.6));
    CHECK(t.vectors[0][1] == doctest::Approx(0.8));
    const auto hashed = EmbeddingTable::hashed({"x", "y", "z"}, 16, 7);
    for (const auto& v : hashed.vectors) {
        double norm = 0.0;
        for (double x : v) norm += x * x;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
    }
    // deterministic per word and seed
    const auto again = EmbeddingTable::hashed({"x", "y", "z"}, 16, 7);
    CHECK(hashed.vectors == again.vectors);
}

TEST_CASE("embedding file loader round-trips") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "obcomp_emb";
    fs::create_directories(dir);
    const std::string path = (dir / "vecs.txt").string();
    std::ofstream(path) << "alpha 1 0 0\nbeta 0 2 0\ngamma 0 0 0.5\n";
    const auto t = EmbeddingTable::load_file(path);
    CHECK(t.size() == 3);
    CHECK(t.dim == 3);
    CHECK(t.vectors[1][1] == doctest::Approx(1.0));  // normalized
    fs::remove_all(dir);
}

TEST_CASE("identical vectors connect, orthogonal vectors stay apart") {
    EmbeddingTable t;
    t.add("a", {1.0, 0.0});
    t.add("b", {1.0, 0.0});
    auto g = build_knn_graph(t, 1, 0.5);
    CHECK(g.has_edge(0, 1));
    CHECK(g.adj[0][0].second == doctest::Approx(1.0));

    EmbeddingTable ortho;
    ortho.add("a", {1.0, 0.0});
    ortho.add("b", {0.0, 1.0});
    g = build_knn_graph(ortho, 1, 0.5);
    CHECK(g.total_weight() == 0.0);
}

TEST_CASE("knn graph equals the brute-force construction on random tables") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6 + static_cast<int>(rng() % 30);
        std::vector<std::string> words;
        for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
        const auto table = EmbeddingTable::hashed(words, 8, rng());
        const int k = 1 + static_cast<int>(rng() % 5);
        const double eta = 0.0;  // keep everything above threshold in play

        const auto g = build_knn_graph(table, k, eta);

        // brute force: top-k similarity lists, then union symmetrization
        std::set<std::pair<int, int>> expect;
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> sims;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                double s = 0.0;
                for (int d = 0; d < table.dim; ++d) {
                    s += table.vectors[i][d] * table.vectors[j][d];
                }
                if (s >= eta) sims.emplace_back(s, j);
            }
            std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (int s = 0; s < std::min<int>(k, static_cast<int>(sims.size())); ++s) {
                const int j = sims[static_cast<size_t>(s)].second;
                expect.insert({std::min(i, j), std::max(i, j)});
            }
        }
        std::set<std::pair<int, int>> got;
        for (int i = 0; i < n; ++i) {
            for (const auto& [j, w] : g.adj[static_cast<size_t>(i)]) {
                CHECK(w >= eta);
                got.insert({std::min(i, j), std::max(i, j)});
                CHECK(g.has_edge(j, i));  // symmetry
            }
        }
        CHECK(got == expect);
    }
}

TEST_CASE("modularity of a single-edge graph in one community is zero") {
    oracle::DenseGraph dense(2);
    dense.add_edge(0, 1, 1.0);
    const auto g = graph_from_dense(dense);
    CHECK(modularity(g, {0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("all-singleton partitions never score positive") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);
        oracle::DenseGraph dense(n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng() % 2) dense.add_edge(i, j, 0.5 + (rng() % 100) / 100.0);
            }
        }
        const auto g = graph_from_dense(dense);
        if (g.total_weight() <= 0.0) continue;
        std::vector<int> singletons(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) singletons[static_cast<size_t>(i)] = i;
        CHECK(modularity(g, singletons) <= 1e-12);
        CHECK(modularity(g, singletons) ==
              doctest::Approx(oracle::modularity_pairwise(dense, singletons)).epsilon(1e-12));
    }
}

TEST_CASE("two disjoint triangles split by triangle score exactly one half") {
    const auto dense = two_triangles();
    const auto g = graph_from_dense(dense);
    const std::vector<int> partition{0, 0, 0, 1, 1, 1};
    CHECK(modularity(g, partition) == 0.5);
    CHECK(oracle::modularity_pairwise(dense, partition) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("modularity stays within [-0.5, 1] and matches the pairwise oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 7);
        oracle::DenseGraph dense(n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng() % 100 < 55) dense.add_edge(i, j, 0.25 + (rng() % 100) / 100.0);
            }
        }
        const auto g = graph_from_dense(dense);
        if (g.total_weight() <= 0.0) continue;
        std::vector<int> partition(static_cast<size_t>(n));
        for (auto& c : partition) c = static_cast<int>(rng() % 3);
        const double got = modularity(g, partition);
        CHECK(got == doctest::Approx(oracle::modularity_pairwise(dense, partition)).epsilon(1e-12));
        CHECK(got >= -0.5 - 1e-12);
        CHECK(got <= 1.0 + 1e-12);
    }
}

TEST_CASE("louvain separates two cliques joined by one edge") {
    oracle::DenseGraph dense(8);
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            dense.add_edge(i, j, 1.0);
            dense.add_edge(i + 4, j + 4, 1.0);
        }
    }
    dense.add_edge(0, 4, 1.0);
    const auto g = graph_from_dense(dense);
    const auto communities = louvain_communities(g, 11);
    REQUIRE(communities.size() == 2);
    CHECK(communities[0] == std::vector<int>{0, 1, 2, 3});
    CHECK(communities[1] == std::vector<int>{4, 5, 6, 7});

    const double got = modularity(g, membership_of(communities, 8));
    CHECK(got == doctest::Approx(oracle::best_partition_modularity(dense)).epsilon(1e-12));
}

TEST_CASE("edgeless graphs fall apart into singletons") {
    KnnGraph g;
    g.n = 5;
    g.adj.assign(5, {});
    const auto communities = louvain_communities(g, 3);
    CHECK(communities.size() == 5);
    for (size_t i = 0; i < communities.size(); ++i) {
        CHECK(communities[i].size() == 1);
    }
}

TEST_CASE("louvain hits the exhaustive optimum on random graphs up to n=8") {
    std::mt19937_64 rng(13);
    int nontrivial = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);  // 3..8
        oracle::DenseGraph dense(n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng() % 100 < 50) dense.add_edge(i, j, 0.25 + (rng() % 100) / 100.0);
            }
        }
        const auto g = graph_from_dense(dense);
        if (g.total_weight() <= 0.0) continue;
        ++nontrivial;
        const auto communities = louvain_communities(g, rng());
        const double got = modularity(g, membership_of(communities, n));
        const double best = oracle::best_partition_modularity(dense);
        CHECK(got == doctest::Approx(best).epsilon(1e-9));
        // never worse than the all-singleton start
        std::vector<int> singles(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) singles[static_cast<size_t>(i)] = i;
        CHECK(got >= modularity(g, singles) - 1e-12);
    }
    CHECK(nontrivial >= 50);
}

TEST_CASE("louvain partitions cover every node exactly once") {
    std::mt19937_64 rng(17);
    const int n = 24;
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    const auto table = EmbeddingTable::hashed(words, 8, 99);
    const auto g = build_knn_graph(table, 4, 0.0);
    const auto clusters = louvain_partition(g, table, 5);
    std::set<int> seen;
    for (const auto& cluster : clusters) {
        for (int i : cluster.members) {
            CHECK(seen.insert(i).second);
        }
        double norm = 0.0;
        for (double v : cluster.centroid) norm += v * v;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
        // representatives are the members ranked by cosine against the centroid
        CHECK(cluster.representatives.size() == cluster.members.size());
        double prev = 2.0;
        for (int i : cluster.representatives) {
            double cos = 0.0;
            for (int d = 0; d < table.dim; ++d) {
                cos += table.vectors[static_cast<size_t>(i)][static_cast<size_t>(d)] *
                       cluster.centroid[static_cast<size_t>(d)];
            }
            CHECK(cos <= prev + 1e-12);
            prev = cos;
        }
    }
    CHECK(static_cast<int>(seen.size()) == n);
}

TEST_CASE("louvain is deterministic per seed") {
    std::vector<std::string> words;
    for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
    const auto table = EmbeddingTable::hashed(words, 8, 3);
    const auto g = build_knn_graph(table, 3, 0.0);
    CHECK(louvain_communities(g, 42) == louvain_communities(g, 42));
}

TEST_CASE("chunk_nouns covers every noun in order with 5/6 sizes") {
    std::vector<std::string> nouns;
    for (int i = 0; i < 11; ++i) nouns.push_back("n" + std::to_string(i));
    const auto chunks = chunk_nouns(nouns);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].size() == 5);
    CHECK(chunks[1].size() == 6);
    std::vector<std::string> flat;
    for (const auto& c : chunks) flat.insert(flat.end(), c.begin(), c.end());
    CHECK(flat == nouns);
}

TEST_CASE("chunk_nouns size table") {
    auto sizes = [](int n) {
        std::vector<std::string> nouns(static_cast<size_t>(n), "x");
        std::vector<int> out;
        for (const auto& c : chunk_nouns(nouns)) out.push_back(static_cast<int>(c.size()));
        return out;
    };
    CHECK(sizes(5) == std::vector<int>{5});
    CHECK(sizes(6) == std::vector<int>{6});
    CHECK(sizes(10) == std::vector<int>{5, 5});
    CHECK(sizes(12) == std::vector<int>{6, 6});
    CHECK(sizes(17) == std::vector<int>{5, 6, 6});
    CHECK(sizes(7) == std::vector<int>{5, 2});   // remainder chunk
    CHECK(sizes(13) == std::vector<int>{5, 5, 3});
    CHECK(sizes(4) == std::vector<int>{4});
    CHECK(sizes(1) == std::vector<int>{1});
    CHECK(sizes(0).empty());
    // exhaustive coverage property
    for (int n = 1; n <= 40; ++n) {
        int total = 0;
        bool seen_short = false;
        const auto ss = sizes(n);
        for (size_t i = 0; i < ss.size(); ++i) {
            total += ss[i];
            if (ss[i] != 5 && ss[i] != 6) {
                CHECK(i == ss.size() - 1);  // only the last chunk may be short
                seen_short = true;
            }
        }
        (void)seen_short;
        CHECK(total == n);
    }
}

TEST_CASE("round-robin pairing follows (l mod |F|)+1 on the shuffled list") {
    // single cluster of 26 nouns -> chunk sizes {5,5,5,5,6} -> 5 chunks
    EmbeddingTable table;
    std::vector<std::string> words;
    for (int i = 0; i < 26; ++i) words.push_back("n" + std::to_string(i));
    const auto hashed = EmbeddingTable::hashed(words, 8, 1);
    SceneCluster cluster;
    for (int i = 0; i < 26; ++i) cluster.members.push_back(i);
    cluster.centroid.assign(8, 0.0);

    const std::vector<std::string> foregrounds{"f1", "f2", "f3"};
    const auto pairs = make_prompt_pairs({cluster}, hashed, foregrounds, 77);
    REQUIRE(pairs.size() == 5);

    // recover the shuffled ordering: chunk 3 maps to shuffled[0]
    std::vector<std::string> shuffled(3);
    shuffled[1 % 3] = pairs[0].fg_entity;
    shuffled[2 % 3] = pairs[1].fg_entity;
    shuffled[3 % 3] = pairs[2].fg_entity;
    CHECK(pairs[3].fg_entity == shuffled[4 % 3]);
    CHECK(pairs[4].fg_entity == shuffled[5 % 3]);
    // every foreground appears floor(5/3)=1 or ceil(5/3)=2 times
    std::map<std::string, int> counts;
    for (const auto& p : pairs) counts[p.fg_entity]++;
    for (const auto& [fg, count] : counts) {
        CHECK(count >= 1);
        CHECK(count <= 2);
    }
    CHECK(counts.size() == 3);

    // |F|=1 pairs everything with the single foreground
    const auto solo = make_prompt_pairs({cluster}, hashed, {"only"}, 77);
    for (const auto& p : solo) CHECK(p.fg_entity == "only");
}

TEST_CASE("make_prompt_pairs is deterministic and preserves chunk order") {
    std::vector<std::string> words;
    for (int i = 0; i < 14; ++i) words.push_back("w" + std::to_string(i));
    const auto table = EmbeddingTable::hashed(words, 8, 5);
    SceneCluster a, b;
    for (int i = 0; i < 7; ++i) a.members.push_back(i);
    for (int i = 7; i < 14; ++i) b.members.push_back(i);
    const auto p1 = make_prompt_pairs({a, b}, table, {"x", "y"}, 3);
    const auto p2 = make_prompt_pairs({a, b}, table, {"x", "y"}, 3);
    REQUIRE(p1.size() == p2.size());
    for (size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].bg_chunk == p2[i].bg_chunk);
        CHECK(p1[i].fg_entity == p2[i].fg_entity);
        CHECK(p1[i].cluster_id == p2[i].cluster_id);
    }
    CHECK(p1[0].bg_chunk == std::vector<std::string>{"w0", "w1", "w2", "w3", "w4"});
}

TEST_CASE("count_sentences on terminal punctuation") {
    CHECK(count_sentences("One. Two.") == 2);
    CHECK(count_sentences("One. Two. Three.") == 3);
    CHECK(count_sentences("What?! Really.") == 2);
    CHECK(count_sentences("No terminal punctuation") == 1);
    CHECK(count_sentences("") == 0);
}

TEST_CASE("synthesize_prompts stores replies verbatim and flags bad formats") {
    const std::string two =
        "The room is softly illuminated by a mixture of natural sunlight streaming through the "
        "window and the gentle flicker of candlelight, casting warm glows and subtle shadows on "
        "the walls. In the foreground, Ken Davitian sits comfortably in an armchair, the flames "
        "from the nearby candles reflecting in his eyes as he smiles warmly.";
    int call = 0;
    const CallbackAgentClient client([&](const AgentRequest& req) -> std::string {
        CHECK(req.system_prompt == "synth");
        ++call;
        if (call == 1) return two;
        if (call == 2) return "One. Two. Three.";
        throw std::runtime_error("down");
    });

    std::vector<PromptPair> pairs(3);
    pairs[0].bg_chunk = {"light", "lights", "candlelight", "sun", "flame"};
    pairs[0].fg_entity = "Ken Davitian";
    pairs[1].bg_chunk = {"a", "b", "c", "d", "e"};
    pairs[1].fg_entity = "x";
    pairs[2].bg_chunk = {"f", "g", "h", "i", "j"};
    pairs[2].fg_entity = "y";

    synthesize_prompts(pairs, client, "synth");
    CHECK(pairs[0].status == PairStatus::ok);
    CHECK(*pairs[0].prompt == two);
    CHECK(pairs[1].status == PairStatus::bad_format);
    CHECK(pairs[1].prompt.has_value());  // flagged, not dropped
    CHECK(pairs[2].status == PairStatus::failed);
}

TEST_CASE("tagged tsv loader parses token-tag lines") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "obcomp_tsv";
    fs::create_directories(dir);
    const std::string path = (dir / "corpus.tsv").string();
    std::ofstream(path) << "The\tDET\ndog\tNOUN\n\nruns\tVERB\n";
    const auto rows = load_tagged_tsv(path);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].first == "dog");
    CHECK(rows[1].second == "NOUN");
    fs::remove_all(dir);
}

#include "obcomp/benchbuild.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "obcomp/rng.hpp"

namespace obc {

namespace {

std::string to_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void l2_normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12) {
        throw std::invalid_argument("EmbeddingTable: zero vector cannot be normalized");
    }
    for (auto& x : v) x /= n;
}

}  // namespace

void EmbeddingTable::add(const std::string& word, std::vector<double> vec) {
    if (dim == 0) {
        dim = static_cast<int>(vec.size());
    }
    if (static_cast<int>(vec.size()) != dim) {
        throw std::invalid_argument("EmbeddingTable: inconsistent vector dimension for " + word);
    }
    if (index.count(word)) {
        return;  // first occurrence wins
    }
    l2_normalize(vec);
    index[word] = static_cast<int>(words.size());
    words.push_back(word);
    vectors.push_back(std::move(vec));
}

EmbeddingTable EmbeddingTable::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("EmbeddingTable: cannot open " + path);
    }
    EmbeddingTable table;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string word;
        is >> word;
        std::vector<double> vec;
        double v;
        while (is >> v) vec.push_back(v);
        if (word.empty() || vec.empty()) {
            throw std::runtime_error("EmbeddingTable: malformed line in " + path);
        }
        table.add(word, std::move(vec));
    }
    return table;
}

EmbeddingTable EmbeddingTable::hashed(const std::vector<std::string>& words, int dim,
                                      uint64_t seed) {
    if (dim < 1) {
        throw std::invalid_argument("EmbeddingTable: dim must be positive");
    }
    EmbeddingTable table;
    table.dim = dim;
    for (const auto& word : words) {
        GaussianRng rng(sub_seed(seed, word));
        std::vector<double> vec(static_cast<size_t>(dim));
        for (auto& v : vec) v = rng.next();
        table.add(word, std::move(vec));
    }
    return table;
}

double KnnGraph::degree(int i) const {
    double d = 0.0;
    for (const auto& [j, w] : adj[static_cast<size_t>(i)]) d += w;
    return d;
}

double KnnGraph::total_weight() const {
    double m2 = 0.0;
    for (int i = 0; i < n; ++i) m2 += degree(i);
    return m2 / 2.0;
}

bool KnnGraph::has_edge(int i, int j) const {
    for (const auto& [nb, w] : adj[static_cast<size_t>(i)]) {
        if (nb == j) return true;
    }
    return false;
}

std::vector<std::string> extract_noun_vocab(
    const std::vector<std::pair<std::string, std::string>>& tagged_corpus) {
    std::set<std::string> nouns;
    for (const auto& [token, pos] : tagged_corpus) {
        if (pos != "NOUN" && pos != "PROPN") continue;
        if (token.empty()) continue;
        nouns.insert(to_lower(token));
    }
    return {nouns.begin(), nouns.end()};
}

std::vector<std::pair<std::string, std::string>> load_tagged_tsv(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("load_tagged_tsv: cannot open " + path);
    }
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error("load_tagged_tsv: line without tab: " + line);
        }
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

std::vector<std::string> extract_noun_vocab_plain(const std::string& text,
                                                  const std::vector<std::string>& lexicon) {
    std::set<std::string> lex(lexicon.begin(), lexicon.end());
    std::set<std::string> nouns;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty() && lex.count(cur)) nouns.insert(cur);
        cur.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return {nouns.begin(), nouns.end()};
}

KnnGraph build_knn_graph(const EmbeddingTable& emb, int k, double eta) {
    if (k < 1) {
        throw std::invalid_argument("build_knn_graph: k must be >= 1");
    }
    KnnGraph g;
    g.n = emb.size();
    g.adj.assign(static_cast<size_t>(g.n), {});
    if (g.n < 2) {
        return g;
    }

    std::set<std::pair<int, int>> edges;  // (min,max) id pairs
    std::vector<std::pair<double, int>> sims;
    for (int i = 0; i < g.n; ++i) {
        sims.clear();
        for (int j = 0; j < g.n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (int d = 0; d < emb.dim; ++d) {
                s += emb.vectors[static_cast<size_t>(i)][static_cast<size_t>(d)] *
                     emb.vectors[static_cast<size_t>(j)][static_cast<size_t>(d)];
            }
            if (s >= eta) sims.emplace_back(s, j);
        }
        // strongest first; ties broken toward the lower id for determinism
        std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const size_t keep = std::min<size_t>(static_cast<size_t>(k), sims.size());
        for (size_t s = 0; s < keep; ++s) {
            const int j = sims[s].second;
            edges.insert({std::min(i, j), std::max(i, j)});
        }
    }

    for (const auto& [i, j] : edges) {
        double s = 0.0;
        for (int d = 0; d < emb.dim; ++d) {
            s += emb.vectors[static_cast<size_t>(i)][static_cast<size_t>(d)] *
                 emb.vectors[static_cast<size_t>(j)][static_cast<size_t>(d)];
        }
        g.adj[static_cast<size_t>(i)].emplace_back(j, s);
        g.adj[static_cast<size_t>(j)].emplace_back(i, s);
    }
    for (auto& nbrs : g.adj) {
        std::sort(nbrs.begin(), nbrs.end());
    }
    return g;
}

double modularity(const KnnGraph& graph, const std::vector<int>& partition) {
    if (static_cast<int>(partition.size()) != graph.n) {
        throw std::invalid_argument("modularity: partition does not cover all nodes");
    }
    const double m = graph.total_weight();
    if (m <= 0.0) {
        std::cerr << "warning: modularity of an edgeless graph is defined as 0\n";
        return 0.0;
    }
    const double two_m = 2.0 * m;

    // aggregate form: sum_c [w_in(c)/2m - (deg(c)/2m)^2]
    int max_comm = 0;
    for (int c : partition) max_comm = std::max(max_comm, c);
    std::vector<double> w_in(static_cast<size_t>(max_comm) + 1, 0.0);
    std::vector<double> deg(static_cast<size_t>(max_comm) + 1, 0.0);
    for (int i = 0; i < graph.n; ++i) {
        const int ci = partition[static_cast<size_t>(i)];
        deg[static_cast<size_t>(ci)] += graph.degree(i);
        for (const auto& [j, w] : graph.adj[static_cast<size_t>(i)]) {
            if (partition[static_cast<size_t>(j)] == ci) {
                w_in[static_cast<size_t>(ci)] += w;  // both directions accumulate
            }
        }
    }
    double q = 0.0;
    for (size_t c = 0; c < w_in.size(); ++c) {
        const double frac_in = w_in[c] / two_m;
        const double frac_deg = deg[c] / two_m;
        q += frac_in - frac_deg * frac_deg;
    }
    return q;
}

namespace {

struct LouvainLevel {
    const KnnGraph* graph;
    std::vector<int> node_comm;
    std::vector<double> comm_tot;  // sum of degrees per community
    std::vector<int> comm_size;
    std::vector<int> free_ids;  // empty community labels, targets for isolation moves
    double m = 0.0;

    explicit LouvainLevel(const KnnGraph& g) : graph(&g) {
        node_comm.resize(static_cast<size_t>(g.n));
        comm_tot.resize(static_cast<size_t>(g.n));
        comm_size.assign(static_cast<size_t>(g.n), 1);
        for (int i = 0; i < g.n; ++i) {
            node_comm[static_cast<size_t>(i)] = i;
            comm_tot[static_cast<size_t>(i)] = g.degree(i);
        }
        m = g.total_weight();
    }

    // one pass of local moves; returns number of moves. Candidates are the
    // neighboring communities, the current one, and a fresh empty community.
    int local_move_pass(const std::vector<int>& order) {
        int moves = 0;
        std::vector<double> links_to(static_cast<size_t>(graph->n), 0.0);
        std::vector<int> touched;
        for (int node : order) {
            const double k_i = graph->degree(node);
            const int old_comm = node_comm[static_cast<size_t>(node)];

            touched.clear();
            links_to[static_cast<size_t>(old_comm)] = 0.0;
            touched.push_back(old_comm);
            for (const auto& [nb, w] : graph->adj[static_cast<size_t>(node)]) {
                if (nb == node) continue;
                const int c = node_comm[static_cast<size_t>(nb)];
                if (links_to[static_cast<size_t>(c)] == 0.0 &&
                    std::find(touched.begin(), touched.end(), c) == touched.end()) {
                    touched.push_back(c);
                }
                links_to[static_cast<size_t>(c)] += w;
            }

            comm_tot[static_cast<size_t>(old_comm)] -= k_i;
            comm_size[static_cast<size_t>(old_comm)] -= 1;
            if (comm_size[static_cast<size_t>(old_comm)] == 0) {
                free_ids.push_back(old_comm);
            }

            // gain of inserting into c (up to a constant): links_to[c] - tot(c)*k_i/2m
            int best_comm = old_comm;
            double best_gain = links_to[static_cast<size_t>(old_comm)] -
                               comm_tot[static_cast<size_t>(old_comm)] * k_i / (2.0 * m);
            std::sort(touched.begin(), touched.end());
            for (int c : touched) {
                const double gain = links_to[static_cast<size_t>(c)] -
                                    comm_tot[static_cast<size_t>(c)] * k_i / (2.0 * m);
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            // isolating the node scores zero by definition
            if (0.0 > best_gain + 1e-12 && !free_ids.empty()) {
                best_comm = free_ids.back();
            }

            if (comm_size[static_cast<size_t>(best_comm)] == 0) {
                // claims the most recently freed label
                free_ids.pop_back();
            }
            comm_tot[static_cast<size_t>(best_comm)] += k_i;
            comm_size[static_cast<size_t>(best_comm)] += 1;
            node_comm[static_cast<size_t>(node)] = best_comm;
            if (best_comm != old_comm) ++moves;

            for (int c : touched) links_to[static_cast<size_t>(c)] = 0.0;
        }
        return moves;
    }
};

// collapse communities into a weighted supergraph
KnnGraph aggregate(const KnnGraph& g, const std::vector<int>& node_comm,
                   std::vector<int>& renumber) {
    renumber.assign(static_cast<size_t>(g.n), -1);
    int next = 0;
    for (int i = 0; i < g.n; ++i) {
        const int c = node_comm[static_cast<size_t>(i)];
        if (renumber[static_cast<size_t>(c)] == -1) {
            renumber[static_cast<size_t>(c)] = next++;
        }
    }
    std::vector<std::unordered_map<int, double>> merged(static_cast<size_t>(next));
    for (int i = 0; i < g.n; ++i) {
        const int ci = renumber[static_cast<size_t>(node_comm[static_cast<size_t>(i)])];
        for (const auto& [j, w] : g.adj[static_cast<size_t>(i)]) {
            const int cj = renumber[static_cast<size_t>(node_comm[static_cast<size_t>(j)])];
            if (j == i) {
                merged[static_cast<size_t>(ci)][ci] += w;  // carried self-loop, already doubled
            } else if (ci == cj) {
                if (i < j) merged[static_cast<size_t>(ci)][ci] += 2.0 * w;
            } else {
                merged[static_cast<size_t>(ci)][cj] += w;
            }
        }
    }
    KnnGraph super;
    super.n = next;
    super.adj.assign(static_cast<size_t>(next), {});
    for (int c = 0; c < next; ++c) {
        for (const auto& [nb, w] : merged[static_cast<size_t>(c)]) {
            super.adj[static_cast<size_t>(c)].emplace_back(nb, w);
        }
        std::sort(super.adj[static_cast<size_t>(c)].begin(),
                  super.adj[static_cast<size_t>(c)].end());
    }
    return super;
}

}  // namespace

namespace {

// one full two-phase Louvain run for a fixed visit-order seed
std::vector<std::vector<int>> louvain_single_run(const KnnGraph& graph, uint64_t seed) {
    // membership of original nodes in the current hierarchy level
    std::vector<int> membership(static_cast<size_t>(graph.n));
    std::iota(membership.begin(), membership.end(), 0);

    KnnGraph level_graph = graph;
    uint64_t level_seed = seed;
    while (true) {
        if (level_graph.total_weight() <= 0.0) break;

        LouvainLevel level(level_graph);
        std::vector<int> order(static_cast<size_t>(level_graph.n));
        std::iota(order.begin(), order.end(), 0);
        seeded_shuffle(order, sub_seed(level_seed, "louvain-order"));

        int improving_passes = 0;
        while (level.local_move_pass(order) > 0) {
            ++improving_passes;
        }
        if (improving_passes == 0) {
            break;  // local optimum at this level
        }

        std::vector<int> renumber;
        KnnGraph super = aggregate(level_graph, level.node_comm, renumber);
        for (auto& m : membership) {
            m = renumber[static_cast<size_t>(level.node_comm[static_cast<size_t>(m)])];
        }
        if (super.n == level_graph.n) {
            break;  // no further coarsening possible
        }
        level_graph = std::move(super);
        level_seed = sub_seed(level_seed, "next-level");
    }

    int max_comm = 0;
    for (int c : membership) max_comm = std::max(max_comm, c);
    std::vector<std::vector<int>> communities(static_cast<size_t>(max_comm) + 1);
    for (int i = 0; i < graph.n; ++i) {
        communities[static_cast<size_t>(membership[static_cast<size_t>(i)])].push_back(i);
    }
    communities.erase(std::remove_if(communities.begin(), communities.end(),
                                     [](const auto& c) { return c.empty(); }),
                      communities.end());
    std::sort(communities.begin(), communities.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return communities;
}

}  // namespace

std::vector<std::vector<int>> louvain_communities(const KnnGraph& graph, uint64_t seed) {
    if (graph.n == 0) {
        return {};
    }
    // the greedy result depends on the visit order, so restart over derived
    // seeds and keep the best-modularity partition (first wins ties)
    constexpr int kRestarts = 12;
    std::vector<std::vector<int>> best;
    double best_q = 0.0;
    for (int r = 0; r < kRestarts; ++r) {
        auto candidate = louvain_single_run(graph, sub_seed(seed, "restart-" + std::to_string(r)));
        std::vector<int> partition(static_cast<size_t>(graph.n), 0);
        for (size_t c = 0; c < candidate.size(); ++c) {
            for (int i : candidate[c]) partition[static_cast<size_t>(i)] = static_cast<int>(c);
        }
        const double q = graph.total_weight() > 0.0 ? modularity(graph, partition) : 0.0;
        if (best.empty() || q > best_q + 1e-15) {
            best = std::move(candidate);
            best_q = q;
        }
    }
    return best;
}

std::vector<SceneCluster> louvain_partition(const KnnGraph& graph, const EmbeddingTable& emb,
                                            uint64_t seed) {
    if (graph.n != emb.size()) {
        throw std::invalid_argument("louvain_partition: graph/embedding size mismatch");
    }
    const auto communities = louvain_communities(graph, seed);
    std::vector<SceneCluster> clusters;
    clusters.reserve(communities.size());
    for (const auto& members : communities) {
        SceneCluster cluster;
        cluster.members = members;
        cluster.centroid.assign(static_cast<size_t>(emb.dim), 0.0);
        for (int i : members) {
            for (int d = 0; d < emb.dim; ++d) {
                cluster.centroid[static_cast<size_t>(d)] +=
                    emb.vectors[static_cast<size_t>(i)][static_cast<size_t>(d)];
            }
        }
        for (auto& v : cluster.centroid) v /= static_cast<double>(members.size());
        double norm = 0.0;
        for (double v : cluster.centroid) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 1e-12) {
            for (auto& v : cluster.centroid) v /= norm;
        }

        std::vector<std::pair<double, int>> ranked;
        for (int i : members) {
            double cos = 0.0;
            for (int d = 0; d < emb.dim; ++d) {
                cos += emb.vectors[static_cast<size_t>(i)][static_cast<size_t>(d)] *
                       cluster.centroid[static_cast<size_t>(d)];
            }
            ranked.emplace_back(cos, i);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (const auto& [cos, i] : ranked) cluster.representatives.push_back(i);
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

std::vector<std::vector<std::string>> chunk_nouns(const std::vector<std::string>& nouns) {
    const int n = static_cast<int>(nouns.size());
    std::vector<int> sizes;
    // smallest number of sixes that leaves a multiple of five
    int sixes = -1;
    for (int b = 0; b * 6 <= n; ++b) {
        if ((n - b * 6) % 5 == 0) {
            sixes = b;
            break;
        }
    }
    if (n == 0) {
        return {};
    }
    if (sixes >= 0) {
        for (int i = 0; i < (n - sixes * 6) / 5; ++i) sizes.push_back(5);
        for (int i = 0; i < sixes; ++i) sizes.push_back(6);
    } else {
        int rest = n;
        while (rest > 6) {
            sizes.push_back(5);
            rest -= 5;
        }
        sizes.push_back(rest);  // short remainder chunk
    }

    std::vector<std::vector<std::string>> chunks;
    int pos = 0;
    for (int s : sizes) {
        chunks.emplace_back(nouns.begin() + pos, nouns.begin() + pos + s);
        pos += s;
    }
    return chunks;
}

std::vector<PromptPair> make_prompt_pairs(const std::vector<SceneCluster>& clusters,
                                          const EmbeddingTable& emb,
                                          const std::vector<std::string>& foregrounds,
                                          uint64_t seed) {
    if (foregrounds.empty()) {
        throw std::invalid_argument("make_prompt_pairs: foreground list is empty");
    }
    std::vector<std::string> shuffled = foregrounds;
    seeded_shuffle(shuffled, sub_seed(seed, "fg-shuffle"));

    std::vector<PromptPair> pairs;
    int chunk_index = 0;  // 1-based below
    for (size_t c = 0; c < clusters.size(); ++c) {
        std::vector<std::string> nouns;
        for (int i : clusters[c].members) {
            nouns.push_back(emb.words[static_cast<size_t>(i)]);
        }
        for (auto& chunk : chunk_nouns(nouns)) {
            ++chunk_index;
            PromptPair pair;
            pair.cluster_id = static_cast<int>(c);
            pair.bg_chunk = std::move(chunk);
            const size_t fg_idx =
                static_cast<size_t>(chunk_index % static_cast<int>(shuffled.size()));
            pair.fg_entity = shuffled[fg_idx];  // (l mod |F|) + 1 in 1-based terms
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

int count_sentences(const std::string& text) {
    int count = 0;
    bool in_terminal = false;
    bool seen_content = false;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            if (!in_terminal && seen_content) {
                ++count;
                seen_content = false;
            }
            in_terminal = true;
        } else {
            in_terminal = false;
            if (!std::isspace(static_cast<unsigned char>(c))) seen_content = true;
        }
    }
    if (seen_content) ++count;  // trailing sentence without terminal punctuation
    return count;
}

void synthesize_prompts(std::vector<PromptPair>& pairs, const AgentClient& client,
                        const std::string& system_prompt) {
    for (auto& pair : pairs) {
        std::ostringstream user;
        user << "BG nouns: ";
        for (size_t i = 0; i < pair.bg_chunk.size(); ++i) {
            if (i) user << ", ";
            user << pair.bg_chunk[i];
        }
        user << "\nObj nouns: " << pair.fg_entity;

        AgentRequest req;
        req.system_prompt = system_prompt;
        req.user_prompt = user.str();
        req.temperature = 0.7;
        try {
            const std::string reply = client.complete(req);
            pair.prompt = reply;
            pair.status = count_sentences(reply) == 2 ? PairStatus::ok : PairStatus::bad_format;
        } catch (const std::exception& e) {
            std::cerr << "warning: synthesis failed for cluster " << pair.cluster_id << ": "
                      << e.what() << "\n";
            pair.status = PairStatus::failed;
        }
    }
}

}  // namespace obc

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "obcomp/agent_client.hpp"

namespace obc {

/// Word -> unit vector table; every stored vector is L2-normalized so cosine
/// similarity is a plain dot product.
struct EmbeddingTable {
    int dim = 0;
    std::vector<std::string> words;
    std::vector<std::vector<double>> vectors;
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(words.size()); }
    void add(const std::string& word, std::vector<double> vec);  // normalizes

    // text file, one "word v1 v2 ... vd" per line
    static EmbeddingTable load_file(const std::string& path);
    // deterministic hash embedder for offline runs and tests
    static EmbeddingTable hashed(const std::vector<std::string>& words, int dim, uint64_t seed);
};

/// Symmetric weighted kNN graph; edges carry cosine similarity >= eta.
struct KnnGraph {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> adj;  // sorted by neighbor id

    double degree(int i) const;
    double total_weight() const;  // m = half the sum of directed weights
    bool has_edge(int i, int j) const;
};

// Filter NOUN/PROPN tokens, lowercase, dedupe, sort.
std::vector<std::string> extract_noun_vocab(
    const std::vector<std::pair<std::string, std::string>>& tagged_corpus);

// "token<TAB>tag" per line; blank lines skipped.
std::vector<std::pair<std::string, std::string>> load_tagged_tsv(const std::string& path);

// Plain-text corpus fallback: every token present in the noun lexicon file
// counts as a noun.
std::vector<std::string> extract_noun_vocab_plain(const std::string& text,
                                                  const std::vector<std::string>& lexicon);

KnnGraph build_knn_graph(const EmbeddingTable& emb, int k, double eta);

// Weighted modularity of a full partition (node -> community id). An empty
// graph scores 0 with a warning.
double modularity(const KnnGraph& graph, const std::vector<int>& partition);

// Two-phase Louvain with seeded visit order; among equal-gain moves the
// lowest community id wins. Returns communities of original node ids,
// ordered by smallest member.
std::vector<std::vector<int>> louvain_communities(const KnnGraph& graph, uint64_t seed);

struct SceneCluster {
    std::vector<int> members;
    std::vector<double> centroid;          // unit norm
    std::vector<int> representatives;      // members ranked by cosine to centroid
};

std::vector<SceneCluster> louvain_partition(const KnnGraph& graph, const EmbeddingTable& emb,
                                            uint64_t seed);

enum class PairStatus { pending, ok, bad_format, failed };

struct PromptPair {
    int cluster_id = 0;
    std::vector<std::string> bg_chunk;  // 5 or 6 nouns, short final remainder allowed
    std::string fg_entity;
    std::optional<std::string> prompt;
    PairStatus status = PairStatus::pending;
};

// Slice one cluster's noun list into chunks of 5/6 preserving order; sizes
// that cannot be written as 5a+6b end with one short remainder chunk.
std::vector<std::vector<std::string>> chunk_nouns(const std::vector<std::string>& nouns);

/// Chunk every cluster in order and pair chunk l (1-based, global) with
/// foreground (l mod |F|)+1 from the seed-shuffled foreground list.
std::vector<PromptPair> make_prompt_pairs(const std::vector<SceneCluster>& clusters,
                                          const EmbeddingTable& emb,
                                          const std::vector<std::string>& foregrounds,
                                          uint64_t seed);

// Terminal-punctuation sentence count; the synthesis contract wants exactly 2.
int count_sentences(const std::string& text);

/// One synthesis request per pair; replies are stored verbatim. Replies that
/// are not exactly two sentences are flagged bad_format, transport failures
/// flagged failed; nothing is dropped.
void synthesize_prompts(std::vector<PromptPair>& pairs, const AgentClient& client,
                        const std::string& system_prompt);

}  // namespace obc

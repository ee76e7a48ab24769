#include "obcomp/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace obc {

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine: dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    if (denom < 1e-12) {
        throw std::invalid_argument("cosine: zero-norm embedding");
    }
    return dot / denom;
}

}  // namespace

double noun_recall(const std::vector<std::string>& nouns, const DetectionResult& detections,
                   double tau) {
    if (nouns.empty()) {
        throw std::invalid_argument("noun_recall: empty noun set");
    }
    if (tau < 0.0 || tau > 1.0) {
        throw std::invalid_argument("noun_recall: tau outside [0,1]");
    }
    int hits = 0;
    for (const auto& noun : nouns) {
        double best = 0.0;
        const auto it = detections.find(noun);
        if (it != detections.end()) {
            for (const auto& det : it->second) {
                best = std::max(best, det.conf);
            }
        }
        if (best >= tau) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(nouns.size());
}

double caption_diversity(const std::vector<std::vector<double>>& embeddings) {
    if (embeddings.size() < 2) {
        throw std::invalid_argument("caption_diversity: need at least two embeddings");
    }
    double acc = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        for (size_t j = i + 1; j < embeddings.size(); ++j) {
            acc += 1.0 - cosine(embeddings[i], embeddings[j]);
            ++pairs;
        }
    }
    return acc / pairs;
}

double identity_similarity(const std::optional<std::vector<double>>& reference,
                           const std::optional<std::vector<double>>& generated) {
    if (!reference || !generated) {
        return -1.0;  // penalty for a missing face
    }
    return cosine(*reference, *generated);
}

}  // namespace obc

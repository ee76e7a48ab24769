#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace obc {

struct Detection {
    std::array<double, 4> box{0, 0, 0, 0};  // x0, y0, x1, y1
    double conf = 0.0;
};

using DetectionResult = std::map<std::string, std::vector<Detection>>;  // noun -> boxes

// Fraction of nouns whose max detection confidence reaches tau (inclusive);
// undetected nouns score 0.
double noun_recall(const std::vector<std::string>& nouns, const DetectionResult& detections,
                   double tau);

// Mean pairwise cosine distance (1 - cos) over unordered embedding pairs.
double caption_diversity(const std::vector<std::vector<double>>& embeddings);

// Cosine similarity of the reference/generated face pair; -1 when the
// generated face is absent.
double identity_similarity(const std::optional<std::vector<double>>& reference,
                           const std::optional<std::vector<double>>& generated);

}  // namespace obc

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "obcomp/agent_client.hpp"

namespace obc {

/// Validated four-part prompt structure: background and object sentences
/// plus their verbatim noun lists (lowercase, order-preserving, deduplicated).
struct Decomposition {
    std::string background_sentence;
    std::string object_sentence;
    std::vector<std::string> object_nouns;
    std::vector<std::string> background_nouns;

    bool empty() const {
        return background_sentence.empty() && object_sentence.empty() && object_nouns.empty() &&
               background_nouns.empty();
    }
};

struct CandidateScore {
    Decomposition decomposition;
    int score = -1;  // -1 iff invalid, else 1 + valid obj nouns + valid bg nouns
    bool valid = false;
};

/// Strict parse of the agent reply: a JSON object with exactly the keys
/// background_sentence, object_sentence, object_nouns, background_nouns.
/// Anything else (extra keys, wrong types, non-JSON) yields nullopt.
std::optional<Decomposition> parse_decomposition(const std::string& text);

/// Verbatim-noun validation and scoring. Nouns are lowercased, kept only if
/// they appear as substrings of the lowercased composition (or on word
/// boundaries in strict mode), then deduplicated preserving order. Fewer
/// than two surviving nouns on either side invalidates the candidate.
CandidateScore validate_and_score(const Decomposition& candidate, const std::string& composition,
                                  bool word_boundary = false);

// Convenience: parse + validate; parse failures come back as score -1.
CandidateScore score_raw_candidate(const std::string& raw_reply, const std::string& composition,
                                   bool word_boundary = false);

struct DecomposeOptions {
    std::string system_prompt;
    std::vector<double> temperatures = {0.4, 0.9};
    std::vector<double> fallback_temperatures = {0.2, 1.0};
    bool word_boundary = false;
};

/// Query the agent at the primary temperatures, fall back to the second
/// pair if every candidate is invalid, and return the argmax-score
/// candidate (ties to the earliest request). Transport failures count as
/// invalid candidates; if all four calls fail the empty decomposition is
/// returned, so this never throws past the fallback.
Decomposition decompose_prompt(const std::string& composition, const AgentClient& client,
                               const DecomposeOptions& options);

}  // namespace obc

#include "obcomp/decomposer.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <set>

#include <json.hpp>

namespace obc {

using nlohmann::json;

namespace {

std::string to_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// substring match, optionally requiring word boundaries on both ends
bool contains_noun(const std::string& haystack, const std::string& noun, bool word_boundary) {
    if (noun.empty()) return false;
    size_t pos = haystack.find(noun);
    while (pos != std::string::npos) {
        if (!word_boundary) return true;
        const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
        const size_t end = pos + noun.size();
        const bool right_ok = end >= haystack.size() || !is_word_char(haystack[end]);
        if (left_ok && right_ok) return true;
        pos = haystack.find(noun, pos + 1);
    }
    return false;
}

std::vector<std::string> filter_nouns(const std::vector<std::string>& nouns,
                                      const std::string& composition_lower, bool word_boundary) {
    std::vector<std::string> kept;
    std::set<std::string> seen;
    for (const auto& raw : nouns) {
        const std::string n = to_lower(raw);
        if (!contains_noun(composition_lower, n, word_boundary)) continue;
        if (!seen.insert(n).second) continue;
        kept.push_back(n);
    }
    return kept;
}

std::optional<std::vector<std::string>> string_list(const json& j) {
    if (!j.is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) return std::nullopt;
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

std::optional<Decomposition> parse_decomposition(const std::string& text) {
    const json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (j.size() != 4 || !j.contains("background_sentence") || !j.contains("object_sentence") ||
        !j.contains("object_nouns") || !j.contains("background_nouns")) {
        return std::nullopt;
    }
    if (!j["background_sentence"].is_string() || !j["object_sentence"].is_string()) {
        return std::nullopt;
    }
    const auto obj_nouns = string_list(j["object_nouns"]);
    const auto bg_nouns = string_list(j["background_nouns"]);
    if (!obj_nouns || !bg_nouns) return std::nullopt;

    Decomposition d;
    d.background_sentence = j["background_sentence"].get<std::string>();
    d.object_sentence = j["object_sentence"].get<std::string>();
    d.object_nouns = *obj_nouns;
    d.background_nouns = *bg_nouns;
    return d;
}

CandidateScore validate_and_score(const Decomposition& candidate, const std::string& composition,
                                  bool word_boundary) {
    const std::string comp_lower = to_lower(composition);
    CandidateScore result;
    result.decomposition = candidate;
    result.decomposition.object_nouns =
        filter_nouns(candidate.object_nouns, comp_lower, word_boundary);
    result.decomposition.background_nouns =
        filter_nouns(candidate.background_nouns, comp_lower, word_boundary);

    const int n_obj = static_cast<int>(result.decomposition.object_nouns.size());
    const int n_bg = static_cast<int>(result.decomposition.background_nouns.size());
    if (n_obj < 2 || n_bg < 2) {
        result.score = -1;
        result.valid = false;
        return result;
    }
    result.score = 1 + n_obj + n_bg;
    result.valid = true;
    return result;
}

CandidateScore score_raw_candidate(const std::string& raw_reply, const std::string& composition,
                                   bool word_boundary) {
    const auto parsed = parse_decomposition(raw_reply);
    if (!parsed) {
        CandidateScore invalid;
        invalid.score = -1;
        invalid.valid = false;
        return invalid;
    }
    return validate_and_score(*parsed, composition, word_boundary);
}

Decomposition decompose_prompt(const std::string& composition, const AgentClient& client,
                               const DecomposeOptions& options) {
    CandidateScore best;
    auto run_batch = [&](const std::vector<double>& temps) {
        for (double t : temps) {
            AgentRequest req;
            req.system_prompt = options.system_prompt;
            req.user_prompt = composition;
            req.temperature = t;
            CandidateScore cand;
            try {
                cand = score_raw_candidate(client.complete(req), composition,
                                           options.word_boundary);
            } catch (const std::exception& e) {
                std::cerr << "warning: decomposer call at t=" << t << " failed: " << e.what()
                          << "\n";
                cand.score = -1;
                cand.valid = false;
            }
            if (cand.valid && cand.score > best.score) {
                best = cand;
            }
        }
    };

    run_batch(options.temperatures);
    if (!best.valid) {
        run_batch(options.fallback_temperatures);
    }
    if (!best.valid) {
        return Decomposition{};  // deterministic empty fallback
    }
    return best.decomposition;
}

}  // namespace obc

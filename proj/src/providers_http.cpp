#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "obcomp/base64.hpp"
#include "obcomp/image.hpp"
#include "obcomp/pruning.hpp"

namespace obc {

using nlohmann::json;

std::string preview_fingerprint(const Grid2D& preview) {
    const auto bytes = encode_pgm(preview);
    uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

namespace {

std::vector<double> parse_embedding(const std::string& body) {
    const json j = json::parse(body);
    if (!j.contains("embedding") || !j["embedding"].is_array()) {
        throw std::runtime_error("alignment provider: response missing 'embedding' array");
    }
    return j["embedding"].get<std::vector<double>>();
}

}  // namespace

HttpAlignmentProvider::HttpAlignmentProvider(std::string host, int port, std::string path_prefix)
    : host_(std::move(host)), port_(port), prefix_(std::move(path_prefix)) {}

std::vector<double> HttpAlignmentProvider::post(const std::string& route,
                                                const std::string& body) const {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    const auto res = client.Post((prefix_ + route).c_str(), body, "application/json");
    if (!res) {
        throw std::runtime_error("alignment provider: transport failure reaching " + host_);
    }
    if (res->status != 200) {
        throw std::runtime_error("alignment provider: HTTP " + std::to_string(res->status));
    }
    return parse_embedding(res->body);
}

std::vector<double> HttpAlignmentProvider::embed_image(const Grid2D& preview) const {
    json req;
    req["preview_pgm_b64"] = base64_encode(encode_pgm(preview));
    return post("/embed_image", req.dump());
}

std::vector<double> HttpAlignmentProvider::embed_text(const std::string& clause) const {
    json req;
    req["text"] = clause;
    return post("/embed_text", req.dump());
}

ReplayAlignmentProvider::ReplayAlignmentProvider(const std::string& fixture_path) {
    std::ifstream f(fixture_path);
    if (!f) {
        throw std::runtime_error("ReplayAlignmentProvider: cannot open " + fixture_path);
    }
    json j;
    f >> j;
    const json images = j.value("images", json::object());
    for (const auto& [key, value] : images.items()) {
        images_[key] = value.get<std::vector<double>>();
    }
    const json texts = j.value("texts", json::object());
    for (const auto& [key, value] : texts.items()) {
        texts_[key] = value.get<std::vector<double>>();
    }
}

std::vector<double> ReplayAlignmentProvider::embed_image(const Grid2D& preview) const {
    const auto it = images_.find(preview_fingerprint(preview));
    if (it == images_.end()) {
        throw std::runtime_error("ReplayAlignmentProvider: no recorded embedding for this preview");
    }
    return it->second;
}

std::vector<double> ReplayAlignmentProvider::embed_text(const std::string& clause) const {
    const auto it = texts_.find(clause);
    if (it == texts_.end()) {
        throw std::runtime_error("ReplayAlignmentProvider: no recorded embedding for clause: " +
                                 clause);
    }
    return it->second;
}

RecordingAlignmentProvider::RecordingAlignmentProvider(const AlignmentProvider& inner,
                                                       std::string fixture_path)
    : inner_(inner), path_(std::move(fixture_path)) {}

RecordingAlignmentProvider::~RecordingAlignmentProvider() {
    try {
        flush();
    } catch (...) {
        // destructor must not throw; the fixture just stays unwritten
    }
}

std::vector<double> RecordingAlignmentProvider::embed_image(const Grid2D& preview) const {
    auto emb = inner_.embed_image(preview);
    images_[preview_fingerprint(preview)] = emb;
    return emb;
}

std::vector<double> RecordingAlignmentProvider::embed_text(const std::string& clause) const {
    auto emb = inner_.embed_text(clause);
    texts_[clause] = emb;
    return emb;
}

void RecordingAlignmentProvider::flush() const {
    json j;
    j["images"] = json::object();
    j["texts"] = json::object();
    for (const auto& [k, v] : images_) j["images"][k] = v;
    for (const auto& [k, v] : texts_) j["texts"][k] = v;
    std::ofstream f(path_);
    if (!f) {
        throw std::runtime_error("RecordingAlignmentProvider: cannot write " + path_);
    }
    f << j.dump(2) << "\n";
}

}  // namespace obc

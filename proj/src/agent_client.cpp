#include "obcomp/agent_client.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace obc {

using nlohmann::json;

HttpAgentClient::HttpAgentClient(std::string host, int port, std::string path, std::string model,
                                 std::string api_key_env)
    : host_(std::move(host)),
      port_(port),
      path_(std::move(path)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)) {}

std::string HttpAgentClient::complete(const AgentRequest& request) const {
    json body;
    body["model"] = model_;
    body["temperature"] = request.temperature;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", request.system_prompt}},
        json{{"role", "user"}, {"content", request.user_prompt}},
    });

    httplib::Client client(host_, port_);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_env_.empty()) {
        if (const char* key = std::getenv(api_key_env_.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    const auto res = client.Post(path_.c_str(), headers, body.dump(), "application/json");
    if (!res) {
        throw std::runtime_error("agent client: transport failure reaching " + host_);
    }
    if (res->status != 200) {
        throw std::runtime_error("agent client: HTTP " + std::to_string(res->status));
    }
    const json reply = json::parse(res->body);
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
        throw std::runtime_error("agent client: response carries no choices");
    }
    const auto& message = reply["choices"][0].at("message");
    return message.at("content").get<std::string>();
}

ReplayAgentClient::ReplayAgentClient(const std::string& fixture_path) {
    std::ifstream f(fixture_path);
    if (!f) {
        throw std::runtime_error("ReplayAgentClient: cannot open " + fixture_path);
    }
    json j;
    f >> j;
    if (!j.is_array()) {
        throw std::runtime_error("ReplayAgentClient: fixture must be a JSON array");
    }
    for (const auto& entry : j) {
        responses_.push_back(entry.at("response").get<std::string>());
    }
}

ReplayAgentClient::ReplayAgentClient(std::vector<std::string> responses)
    : responses_(std::move(responses)) {}

std::string ReplayAgentClient::complete(const AgentRequest&) const {
    if (next_ >= responses_.size()) {
        throw std::runtime_error("ReplayAgentClient: fixture exhausted");
    }
    return responses_[next_++];
}

RecordingAgentClient::RecordingAgentClient(const AgentClient& inner, std::string fixture_path)
    : inner_(inner), path_(std::move(fixture_path)) {}

RecordingAgentClient::~RecordingAgentClient() {
    try {
        flush();
    } catch (...) {
    }
}

std::string RecordingAgentClient::complete(const AgentRequest& request) const {
    const std::string response = inner_.complete(request);
    exchanges_.emplace_back(request.temperature, response);
    return response;
}

void RecordingAgentClient::flush() const {
    json j = json::array();
    for (const auto& [temp, response] : exchanges_) {
        j.push_back(json{{"temperature", temp}, {"response", response}});
    }
    std::ofstream f(path_);
    if (!f) {
        throw std::runtime_error("RecordingAgentClient: cannot write " + path_);
    }
    f << j.dump(2) << "\n";
}

}  // namespace obc

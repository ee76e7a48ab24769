#pragma once

#include <functional>
#include <string>
#include <vector>

namespace obc {

struct AgentRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
};

/// Chat-completion style text agent. complete() throws on transport or
/// protocol failure; callers decide how a failed call is treated.
class AgentClient {
public:
    virtual ~AgentClient() = default;
    virtual std::string complete(const AgentRequest& request) const = 0;
};

/// OpenAI-compatible chat endpoint: POST {model, temperature, messages} to
/// <path>, read choices[0].message.content. Credentials come from an
/// environment variable so they never land in config files.
class HttpAgentClient final : public AgentClient {
public:
    HttpAgentClient(std::string host, int port, std::string path, std::string model,
                    std::string api_key_env = "");
    std::string complete(const AgentRequest& request) const override;

private:
    std::string host_;
    int port_;
    std::string path_;
    std::string model_;
    std::string api_key_env_;
};

/// Replays responses recorded in a fixture file (JSON array of
/// {"temperature": t, "response": s}), consumed in call order.
class ReplayAgentClient final : public AgentClient {
public:
    explicit ReplayAgentClient(const std::string& fixture_path);
    explicit ReplayAgentClient(std::vector<std::string> responses);
    std::string complete(const AgentRequest& request) const override;

private:
    mutable size_t next_ = 0;
    std::vector<std::string> responses_;
};

/// Test hook: completion backed by an arbitrary callable.
class CallbackAgentClient final : public AgentClient {
public:
    using Fn = std::function<std::string(const AgentRequest&)>;
    explicit CallbackAgentClient(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const AgentRequest& request) const override { return fn_(request); }

private:
    Fn fn_;
};

/// Wraps another client and appends every exchange to a replay fixture.
class RecordingAgentClient final : public AgentClient {
public:
    RecordingAgentClient(const AgentClient& inner, std::string fixture_path);
    ~RecordingAgentClient();
    std::string complete(const AgentRequest& request) const override;
    void flush() const;

private:
    const AgentClient& inner_;
    std::string path_;
    mutable std::vector<std::pair<double, std::string>> exchanges_;
};

}  // namespace obc

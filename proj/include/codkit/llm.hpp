#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/errors.hpp"

namespace codkit {

struct LlmRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string model;  // empty: the client's configured model
};

struct LlmResponse {
    std::string text;      // assistant message content, byte-exact
    std::string raw_body;  // full HTTP response body
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double latency_ms = 0.0;
    int attempts = 1;      // HTTP attempts including backoff retries
    std::string log_ref;   // file name of the logged response, if logging
};

class LlmError : public Error {
public:
    using Error::Error;
};

/// Bad or missing endpoint configuration; raised before any network I/O.
class ConfigError : public LlmError {
public:
    using LlmError::LlmError;
};

class AuthError : public LlmError {
public:
    using LlmError::LlmError;
};

/// Transport failure or retryable status that persisted through every attempt.
class NetworkError : public LlmError {
public:
    NetworkError(const std::string& what, int last_status) : LlmError(what), last_status_(last_status) {}
    int last_status() const { return last_status_; }

private:
    int last_status_;
};

/// Non-retryable HTTP status or an unreadable response body.
class ProtocolError : public LlmError {
public:
    using LlmError::LlmError;
};

struct TransportReply {
    int status = 0;  // HTTP status; negative for a connection-level failure
    std::string body;
};

/// Moves one chat-completion request body to an endpoint.
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportReply post(const std::string& body) = 0;
};

/// POSTs to <base_url>/chat/completions with a bearer token.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(120));
    TransportReply post(const std::string& body) override;

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// Deterministic stand-in for an endpoint. Replies come from a fixture:
///
///   {"model": "...",
///    "rules": [{"match": "<prompt substring>" | "fingerprint": "<sha256 of prompt>",
///               "responses": [{"body": "..."} | {"status": 429}, ...]}],
///    "default": [{"body": "..."}, ...]}
///
/// Rules are tried in order against the last message of the request. Each
/// response list is consumed in order and its final entry repeats once
/// exhausted. A prompt no rule matches, with no default, gets HTTP 404.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(nlohmann::json fixture);
    static std::shared_ptr<ScriptedTransport> from_file(const std::filesystem::path& path);

    TransportReply post(const std::string& body) override;

    std::string model() const;
    std::size_t calls() const;

private:
    struct Script {
        std::string match;
        std::string fingerprint;
        std::vector<nlohmann::json> responses;
        std::size_t cursor = 0;
    };

    TransportReply next(Script& script, const std::string& prompt);

    mutable std::mutex mutex_;
    std::string model_;
    std::vector<Script> rules_;
    std::optional<Script> fallback_;
    std::size_t calls_ = 0;
};

struct BackoffPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base{1000};
    double factor = 2.0;
};

struct ClientConfig {
    std::string base_url;
    std::string model;
    std::string api_key;
    BackoffPolicy backoff;
    std::chrono::milliseconds min_interval{0};  // pacing between requests
    std::function<void(std::chrono::milliseconds)> sleep;  // null: sleep_for
    std::filesystem::path raw_log_dir;  // empty: no logging
    std::string raw_log_prefix = "call";

    /// Fills base_url, model, and api_key (from LLM_API_KEY) where unset.
    static ClientConfig from_environment(std::string base_url, std::string model);
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResponse complete(const LlmRequest& request) = 0;
    virtual std::string model_id() const = 0;
};

/// OpenAI-style chat-completion client: single user message, exponential
/// backoff on 429/5xx/connection failures, verbatim request/response logging.
/// Requests through one client are serialized (one endpoint, one queue).
class ChatCompletionClient : public LlmClient {
public:
    ChatCompletionClient(ClientConfig config, std::shared_ptr<Transport> transport);

    LlmResponse complete(const LlmRequest& request) override;
    std::string model_id() const override { return config_.model; }

private:
    std::string log_exchange(const std::string& kind, const std::string& body);

    ClientConfig config_;
    std::shared_ptr<Transport> transport_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point last_request_{};
    std::size_t sequence_ = 0;
};

/// Validates the configuration (ConfigError on a missing URL or credential)
/// and returns an HTTP-backed client.
std::unique_ptr<LlmClient> make_http_client(ClientConfig config);

std::unique_ptr<LlmClient> make_mock_client(std::shared_ptr<ScriptedTransport> transport, ClientConfig config = {});

/// One-shot completion against a configured HTTP endpoint.
LlmResponse llm_complete(const LlmRequest& request, const ClientConfig& config);

}  // namespace codkit

#include "codkit/llm.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "codkit/util.hpp"

namespace codkit {

using nlohmann::json;

namespace {

bool retryable(int status) { return status < 0 || status == 429 || status >= 500; }

std::string last_message_content(const std::string& body) {
    const json request = json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.contains("messages") || !request["messages"].is_array() ||
        request["messages"].empty()) {
        return {};
    }
    const auto& msg = request["messages"].back();
    if (!msg.contains("content") || !msg["content"].is_string()) return {};
    return msg["content"].get<std::string>();
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("LLM URL needs a scheme: " + base_url);
    const auto path_begin = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_begin);
    std::string path = path_begin == std::string::npos ? std::string() : base_url.substr(path_begin);
    while (!path.empty() && path.back() == '/') path.pop_back();
    path_ = path + "/chat/completions";
}

TransportReply HttpTransport::post(const std::string& body) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) return {-1, httplib::to_string(result.error())};
    return {result->status, result->body};
}

ScriptedTransport::ScriptedTransport(json fixture) {
    if (!fixture.is_object()) throw ConfigError("mock fixture must be a JSON object");
    model_ = fixture.value("model", std::string("mock-model"));
    const auto load = [](const json& list, const char* where) {
        if (!list.is_array() || list.empty())
            throw ConfigError(std::string("mock fixture: '") + where + "' needs a non-empty response list");
        std::vector<json> out;
        for (const auto& r : list) {
            if (!r.is_object() || (!r.contains("body") && !r.contains("status")))
                throw ConfigError(std::string("mock fixture: each response in '") + where +
                                  "' needs \"body\" or \"status\"");
            out.push_back(r);
        }
        return out;
    };
    if (fixture.contains("rules")) {
        for (const auto& rule : fixture["rules"]) {
            Script s;
            s.match = rule.value("match", std::string());
            s.fingerprint = rule.value("fingerprint", std::string());
            if (s.match.empty() && s.fingerprint.empty())
                throw ConfigError("mock fixture: a rule needs \"match\" or \"fingerprint\"");
            s.responses = load(rule.value("responses", json()), "responses");
            rules_.push_back(std::move(s));
        }
    }
    if (fixture.contains("default")) {
        Script s;
        s.responses = load(fixture["default"], "default");
        fallback_ = std::move(s);
    }
}

std::shared_ptr<ScriptedTransport> ScriptedTransport::from_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json fixture = json::parse(text, nullptr, false);
    if (fixture.is_discarded()) throw ConfigError("mock fixture is not valid JSON: " + path.string());
    return std::make_shared<ScriptedTransport>(std::move(fixture));
}

TransportReply ScriptedTransport::next(Script& script, const std::string& prompt) {
    const json& r = script.responses[std::min(script.cursor, script.responses.size() - 1)];
    ++script.cursor;
    const int status = r.value("status", 200);
    if (status != 200) return {status, r.value("body", std::string("{\"error\":\"scripted\"}"))};

    const std::string content = r["body"].get<std::string>();
    json reply = {
        {"id", "mock-" + sha256_hex(prompt).substr(0, 12) + "-" + std::to_string(script.cursor)},
        {"object", "chat.completion"},
        {"model", model_},
        {"choices", json::array({{{"index", 0},
                                  {"message", {{"role", "assistant"}, {"content", content}}},
                                  {"finish_reason", "stop"}}})},
        {"usage",
         {{"prompt_tokens", static_cast<long>(prompt.size() / 4)},
          {"completion_tokens", static_cast<long>(content.size() / 4)},
          {"total_tokens", static_cast<long>((prompt.size() + content.size()) / 4)}}},
    };
    return {200, reply.dump()};
}

TransportReply ScriptedTransport::post(const std::string& body) {
    const std::string prompt = last_message_content(body);
    const std::string fingerprint = sha256_hex(prompt);
    std::lock_guard lock(mutex_);
    ++calls_;
    for (auto& rule : rules_) {
        if (!rule.fingerprint.empty() ? rule.fingerprint == fingerprint
                                      : prompt.find(rule.match) != std::string::npos) {
            return next(rule, prompt);
        }
    }
    if (fallback_) return next(*fallback_, prompt);
    return {404, json{{"error", "no scripted response for prompt fingerprint " + fingerprint}}.dump()};
}

std::string ScriptedTransport::model() const {
    std::lock_guard lock(mutex_);
    return model_;
}

std::size_t ScriptedTransport::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

ClientConfig ClientConfig::from_environment(std::string base_url, std::string model) {
    ClientConfig c;
    c.base_url = std::move(base_url);
    c.model = std::move(model);
    if (const char* key = std::getenv("LLM_API_KEY")) c.api_key = key;
    return c;
}

ChatCompletionClient::ChatCompletionClient(ClientConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (!transport_) throw ConfigError("chat client needs a transport");
    if (!config_.sleep) config_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (config_.backoff.max_attempts < 1) throw ConfigError("backoff.max_attempts must be >= 1");
}

std::string ChatCompletionClient::log_exchange(const std::string& kind, const std::string& body) {
    if (config_.raw_log_dir.empty()) return {};
    std::ostringstream name;
    name << config_.raw_log_prefix << '-' << std::setw(6) << std::setfill('0') << sequence_ << '.' << kind
         << ".json";
    write_file_atomic(config_.raw_log_dir / name.str(), body);
    return name.str();
}

LlmResponse ChatCompletionClient::complete(const LlmRequest& request) {
    const json body = {
        {"model", request.model.empty() ? config_.model : request.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    const std::string wire = body.dump();

    std::lock_guard lock(mutex_);
    LlmResponse response;
    auto delay = config_.backoff.base;
    TransportReply reply;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= config_.backoff.max_attempts; ++attempt) {
        if (config_.min_interval.count() > 0 && last_request_ != std::chrono::steady_clock::time_point{}) {
            const auto since = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - last_request_);
            if (since < config_.min_interval) config_.sleep(config_.min_interval - since);
        }
        ++sequence_;
        log_exchange("request", wire);
        last_request_ = std::chrono::steady_clock::now();
        reply = transport_->post(wire);
        response.log_ref = log_exchange("response", reply.body);
        response.attempts = attempt;

        if (reply.status == 200) break;
        if (reply.status == 401 || reply.status == 403)
            throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")");
        if (!retryable(reply.status))
            throw ProtocolError("HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
        if (attempt == config_.backoff.max_attempts) {
            throw NetworkError("request failed after " + std::to_string(attempt) + " attempts (last status " +
                                   std::to_string(reply.status) + ": " + reply.body.substr(0, 200) + ")",
                               reply.status);
        }
        config_.sleep(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(std::llround(static_cast<double>(delay.count()) * config_.backoff.factor)));
    }
    response.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    response.raw_body = reply.body;
    const json parsed = json::parse(reply.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
        throw ProtocolError("chat-completion response has no choices");
    }
    const auto& message = parsed["choices"][0].value("message", json::object());
    if (!message.contains("content") || !message["content"].is_string())
        throw ProtocolError("chat-completion choice has no text content");
    response.text = message["content"].get<std::string>();
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        response.prompt_tokens = parsed["usage"].value("prompt_tokens", 0L);
        response.completion_tokens = parsed["usage"].value("completion_tokens", 0L);
    }
    return response;
}

std::unique_ptr<LlmClient> make_http_client(ClientConfig config) {
    if (config.base_url.empty()) throw ConfigError("no LLM endpoint configured (--llm-url)");
    if (config.model.empty()) throw ConfigError("no LLM model configured (--llm-model)");
    if (config.api_key.empty()) throw ConfigError("no credential configured (set LLM_API_KEY)");
    auto transport = std::make_shared<HttpTransport>(config.base_url, config.api_key);
    return std::make_unique<ChatCompletionClient>(std::move(config), std::move(transport));
}

std::unique_ptr<LlmClient> make_mock_client(std::shared_ptr<ScriptedTransport> transport, ClientConfig config) {
    if (config.model.empty()) config.model = transport->model();
    return std::make_unique<ChatCompletionClient>(std::move(config), std::move(transport));
}

LlmResponse llm_complete(const LlmRequest& request, const ClientConfig& config) {
    return make_http_client(config)->complete(request);
}

}  // namespace codkit

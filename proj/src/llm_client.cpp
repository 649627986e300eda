#include "feedforge/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

#include <httplib.h>

#include "feedforge/hash.hpp"

namespace feedforge {

std::string_view to_string(ChatErrorKind kind) {
    switch (kind) {
    case ChatErrorKind::transport: return "transport";
    case ChatErrorKind::protocol: return "protocol";
    case ChatErrorKind::timeout: return "timeout";
    case ChatErrorKind::auth: return "auth";
    }
    return "transport";
}

std::string ChatRequest::cache_key() const {
    json canon = {
        {"model", model},
        {"system", system ? json(*system) : json(nullptr)},
        {"user", user},
        {"temperature", temperature},
        {"top_p", top_p},
        {"max_tokens", max_tokens},
        {"sample_index", sample_index},
    };
    return digest128_hex(canon.dump());
}

json ChatRequest::wire_body() const {
    json messages = json::array();
    if (system) messages.push_back({{"role", "system"}, {"content", *system}});
    messages.push_back({{"role", "user"}, {"content", user}});
    return {
        {"model", model},
        {"messages", std::move(messages)},
        {"temperature", temperature},
        {"top_p", top_p},
        {"max_tokens", max_tokens},
    };
}

void ChatRequest::validate() const {
    if (model.empty()) throw ContractError("chat request has no model");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ContractError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ContractError("top_p must lie in (0, 1]");
    if (max_tokens <= 0) throw ContractError("max_tokens must be positive");
}

ChatRequest make_request(std::string model, std::optional<std::string> system, std::string user,
                         const Decoding& decoding, std::uint32_t sample_index) {
    ChatRequest req;
    req.model = std::move(model);
    req.system = std::move(system);
    req.user = std::move(user);
    req.temperature = decoding.temperature;
    req.top_p = decoding.top_p;
    req.max_tokens = decoding.max_tokens;
    req.sample_index = sample_index;
    return req;
}

ChatResponse parse_chat_body(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ChatError(ChatErrorKind::protocol, "response body is not JSON");
    try {
        const json& choice = j.at("choices").at(0);
        const json& content = choice.at("message").at("content");
        if (!content.is_string()) throw ChatError(ChatErrorKind::protocol, "message content is not a string");
        ChatResponse resp;
        resp.text = content.get<std::string>();
        resp.finish_reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                                 ? choice["finish_reason"].get<std::string>()
                                 : "stop";
        resp.raw_body = std::string(body);
        return resp;
    } catch (const json::exception& e) {
        throw ChatError(ChatErrorKind::protocol, std::string("unexpected response shape: ") + e.what());
    }
}

std::string make_chat_body(std::string_view model, std::string_view text, std::string_view finish_reason) {
    json body = {
        {"object", "chat.completion"},
        {"model", model},
        {"choices", json::array({{{"index", 0},
                                  {"message", {{"role", "assistant"}, {"content", text}}},
                                  {"finish_reason", finish_reason}}})},
    };
    return body.dump();
}

ChatResponse MockClient::complete(const ChatRequest& req) {
    req.validate();
    ++calls_;
    return mock_generate(req, seed_, judge_);
}

// ---------------------------------------------------------------------------

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttplibTransport(const std::string& origin, std::chrono::milliseconds timeout)
        : origin_(origin), timeout_(timeout) {}

    HttpReply post(const std::string& path, const std::string& body, const HeaderList& headers) override {
        httplib::Client cli(origin_);
        const auto secs = timeout_.count() / 1000;
        const auto usecs = (timeout_.count() % 1000) * 1000;
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);

        const auto start = std::chrono::steady_clock::now();
        auto res = cli.Post(path, h, body, "application/json");
        if (!res) {
            const auto elapsed = std::chrono::steady_clock::now() - start;
            const auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout_)
                throw ChatError(ChatErrorKind::timeout, "request to " + origin_ + path + " timed out");
            throw ChatError(ChatErrorKind::transport, "request to " + origin_ + path + " failed: " + httplib::to_string(err));
        }
        return {res->status, res->body};
    }

private:
    std::string origin_;
    std::chrono::milliseconds timeout_;
};

// Splits "https://host:port/v1" into ("https://host:port", "/v1/chat/completions").
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme = base_url.find("://");
    if (scheme == std::string::npos) throw ConfigError("base URL needs a scheme: " + base_url);
    auto slash = base_url.find('/', scheme + 3);
    std::string origin = slash == std::string::npos ? base_url : base_url.substr(0, slash);
    std::string path = slash == std::string::npos ? "" : base_url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    const std::string suffix = "/chat/completions";
    if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0)
        path += suffix;
    return {origin, path};
}

} // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& origin, std::chrono::milliseconds timeout) {
    return std::make_unique<HttplibTransport>(origin, timeout);
}

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
    auto d = base_delay;
    for (int i = 1; i < attempt && d < max_delay; ++i) d *= 2;
    return std::min(d, max_delay);
}

std::string api_key_from_env() {
    const char* key = std::getenv(kApiKeyEnv);
    if (!key || !*key) throw ConfigError(std::string("environment variable ") + kApiKeyEnv + " is not set");
    return key;
}

HttpChatClient::HttpChatClient(HttpChatConfig config, std::string api_key, std::unique_ptr<HttpTransport> transport,
                               Sleeper sleeper)
    : config_(std::move(config)), api_key_(std::move(api_key)), transport_(std::move(transport)),
      sleeper_(std::move(sleeper)) {
    if (config_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    auto [origin, path] = split_base_url(config_.base_url);
    path_ = std::move(path);
    if (!transport_) transport_ = make_http_transport(origin, config_.timeout);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatResponse HttpChatClient::complete(const ChatRequest& req) {
    req.validate();
    const std::string body = req.wire_body().dump();
    const HeaderList headers = {{"Authorization", "Bearer " + api_key_}};
    std::string last_failure;
    const int max_attempts = config_.retry.max_attempts;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        ++attempts_;
        const auto start = std::chrono::steady_clock::now();
        HttpReply reply;
        try {
            reply = transport_->post(path_, body, headers);
        } catch (const ChatError& e) {
            if (e.kind() != ChatErrorKind::transport) throw ChatError(e.kind(), e.what(), attempt);
            last_failure = e.what();
            if (attempt < max_attempts) sleeper_(config_.retry.delay_after(attempt));
            continue;
        }
        if (reply.status == 200) {
            ChatResponse resp = parse_chat_body(reply.body);
            resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
            return resp;
        }
        if (reply.status == 401 || reply.status == 403)
            throw ChatError(ChatErrorKind::auth, "HTTP " + std::to_string(reply.status) + " from chat endpoint", attempt);
        if (reply.status != 429 && reply.status < 500)
            throw ChatError(ChatErrorKind::transport,
                            "HTTP " + std::to_string(reply.status) + " from chat endpoint: " + reply.body, attempt);
        last_failure = "HTTP " + std::to_string(reply.status);
        if (attempt < max_attempts) sleeper_(config_.retry.delay_after(attempt));
    }
    throw ChatError(ChatErrorKind::transport,
                    "giving up after " + std::to_string(max_attempts) + " attempts: " + last_failure, max_attempts);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void ResponseCache::put(const std::string& key, const std::string& raw_body) const {
    write_text_atomic(dir_ / (key + ".json"), raw_body);
}

CachingClient::CachingClient(ChatClient& inner, std::optional<ResponseCache> cache, std::size_t max_in_flight)
    : inner_(inner), cache_(std::move(cache)),
      in_flight_(static_cast<std::ptrdiff_t>(max_in_flight == 0 ? 1 : max_in_flight)) {}

ChatResponse CachingClient::complete(const ChatRequest& req) {
    req.validate();
    const std::string key = req.cache_key();
    if (cache_) {
        if (auto raw = cache_->get(key)) {
            try {
                ChatResponse resp = parse_chat_body(*raw);
                resp.from_cache = true;
                ++cache_hits_;
                return resp;
            } catch (const ChatError&) {
                // Corrupt entry: fall through and refetch.
            }
        }
    }
    ChatResponse resp;
    in_flight_.acquire();
    try {
        ++backend_calls_;
        resp = inner_.complete(req);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();
    if (cache_) cache_->put(key, resp.raw_body.empty() ? make_chat_body(req.model, resp.text, resp.finish_reason)
                                                       : resp.raw_body);
    return resp;
}

ChatResponse RoutingClient::complete(const ChatRequest& req) {
    auto it = routes_.find(req.model);
    if (it != routes_.end()) return it->second->complete(req);
    if (fallback_) return fallback_->complete(req);
    throw ConfigError("no chat backend configured for model " + req.model);
}

} // namespace feedforge

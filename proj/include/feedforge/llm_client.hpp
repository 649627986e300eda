#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/jsonl.hpp"

namespace feedforge {

inline constexpr const char* kApiKeyEnv = "FEEDFORGE_API_KEY";

struct Decoding {
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 1024;

    bool operator==(const Decoding&) const = default;
};

struct ChatRequest {
    std::string model;
    std::optional<std::string> system;
    std::string user;
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    // Distinguishes repeated samples of one prompt (best-of-n pools). Not sent on the wire.
    std::uint32_t sample_index = 0;

    // 128-bit hex digest over every field above.
    std::string cache_key() const;

    // {"model","messages":[{"role","content"}...],"temperature","top_p","max_tokens"}
    json wire_body() const;

    // Throws ContractError on out-of-range decoding values.
    void validate() const;
};

ChatRequest make_request(std::string model, std::optional<std::string> system, std::string user,
                         const Decoding& decoding, std::uint32_t sample_index = 0);

struct ChatResponse {
    std::string text;
    std::string finish_reason;
    bool from_cache = false;
    std::int64_t latency_ms = 0;
    std::string raw_body; // response JSON as received (or synthesized by the mock)
};

enum class ChatErrorKind { transport, protocol, timeout, auth };

std::string_view to_string(ChatErrorKind kind);

class ChatError : public Error {
public:
    ChatError(ChatErrorKind kind, const std::string& message, int attempts = 1)
        : Error(message), kind_(kind), attempts_(attempts) {}

    ChatErrorKind kind() const { return kind_; }
    int attempts() const { return attempts_; }

private:
    ChatErrorKind kind_;
    int attempts_;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

// Reads choices[0].message.content and finish_reason. Throws ChatError(protocol).
ChatResponse parse_chat_body(std::string_view body);

// OpenAI-shaped response body carrying text.
std::string make_chat_body(std::string_view model, std::string_view text, std::string_view finish_reason = "stop");

// ---------------------------------------------------------------------------
// Offline mock

// How the mock answers head-to-head judging prompts.
enum class JudgePolicy {
    honest,       // "Tie" for identical responses, otherwise a hashed A/B/Tie
    always_first, // always "A"
};

/// Deterministic pseudo-responses derived from hash(model, user, sample_index, seed).
///
/// Fine-grained annotation prompts get a well-formed "Rating:/Rationale:" block
/// per text slot, critique prompts get "### Feedback ... Overall Score: N",
/// judging prompts get a verdict line, everything else gets pseudo-prose.
ChatResponse mock_generate(const ChatRequest& req, std::uint64_t seed, JudgePolicy judge = JudgePolicy::honest);

// The ratings / score the mock embeds for a given prompt, for round-trip checks.
std::vector<int> mock_fine_grained_ratings(const ChatRequest& req, std::uint64_t seed);
int mock_overall_score(const ChatRequest& req, std::uint64_t seed);

class MockClient : public ChatClient {
public:
    explicit MockClient(std::uint64_t seed, JudgePolicy judge = JudgePolicy::honest) : seed_(seed), judge_(judge) {}

    ChatResponse complete(const ChatRequest& req) override;

    std::size_t calls() const { return calls_.load(); }

private:
    std::uint64_t seed_;
    JudgePolicy judge_;
    std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend

struct HttpReply {
    int status = 0;
    std::string body;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

// One POST. Throws ChatError(transport) on connection failure, ChatError(timeout) on timeout.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpReply post(const std::string& path, const std::string& body, const HeaderList& headers) = 0;
};

// cpp-httplib backed transport for "http[s]://host[:port]" origins.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& origin, std::chrono::milliseconds timeout);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30000};

    // base_delay * 2^(attempt-1), capped.
    std::chrono::milliseconds delay_after(int attempt) const;
};

struct HttpChatConfig {
    std::string base_url; // e.g. https://api.openai.com/v1
    std::chrono::milliseconds timeout{120000};
    RetryPolicy retry;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Reads FEEDFORGE_API_KEY; throws ConfigError when unset or empty.
std::string api_key_from_env();

/// Chat-completions client with exponential backoff on 429, 5xx and
/// connection failures. Timeouts and non-retryable statuses fail immediately.
class HttpChatClient : public ChatClient {
public:
    HttpChatClient(HttpChatConfig config, std::string api_key, std::unique_ptr<HttpTransport> transport = nullptr,
                   Sleeper sleeper = nullptr);

    ChatResponse complete(const ChatRequest& req) override;

    std::size_t attempts() const { return attempts_.load(); }

private:
    HttpChatConfig config_;
    std::string api_key_;
    std::string path_;
    std::unique_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    std::atomic<std::size_t> attempts_{0};
};

// ---------------------------------------------------------------------------
// Caching and concurrency

// Directory of <cache_key>.json files holding raw response bodies.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& raw_body) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

/// Wraps a backend with the response cache and a bound on in-flight calls.
/// Cache hits return without touching the backend or the bound.
class CachingClient : public ChatClient {
public:
    CachingClient(ChatClient& inner, std::optional<ResponseCache> cache, std::size_t max_in_flight = 8);

    ChatResponse complete(const ChatRequest& req) override;

    std::size_t backend_calls() const { return backend_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

private:
    ChatClient& inner_;
    std::optional<ResponseCache> cache_;
    std::counting_semaphore<> in_flight_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

// Dispatches on ChatRequest::model.
class RoutingClient : public ChatClient {
public:
    void route(const std::string& model, ChatClient& client) { routes_[model] = &client; }
    void set_fallback(ChatClient& client) { fallback_ = &client; }

    ChatResponse complete(const ChatRequest& req) override;

private:
    std::map<std::string, ChatClient*> routes_;
    ChatClient* fallback_ = nullptr;
};

// Decoding used for judge calls (annotation and head-to-head evaluation).
struct JudgeSettings {
    std::string model = "gpt-4";
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
};

} // namespace feedforge

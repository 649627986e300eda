#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <mutex>
#include <thread>

#include "feedforge/annotate.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/llm_client.hpp"

namespace ff = feedforge;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct Scripted {
    Scripted(int s, std::string b, std::optional<ff::ChatErrorKind> e = std::nullopt)
        : status(s), body(std::move(b)), error(e) {}

    int status;
    std::string body;
    std::optional<ff::ChatErrorKind> error;
};

class ScriptedTransport : public ff::HttpTransport {
public:
    explicit ScriptedTransport(std::deque<Scripted> script) : script_(std::move(script)) {}

    ff::HttpReply post(const std::string& path, const std::string& body, const ff::HeaderList& headers) override {
        last_path = path;
        last_body = body;
        last_headers = headers;
        ++posts;
        if (script_.empty()) throw std::runtime_error("script exhausted");
        auto s = script_.front();
        script_.pop_front();
        if (s.error) throw ff::ChatError(*s.error, "scripted failure");
        return {s.status, s.body};
    }

    std::string last_path;
    std::string last_body;
    ff::HeaderList last_headers;
    int posts = 0;

private:
    std::deque<Scripted> script_;
};

ff::ChatRequest simple_request(std::uint32_t sample_index = 0) {
    return ff::make_request("m1", std::string("sys"), "hello", ff::Decoding{0.5, 0.9, 64}, sample_index);
}

struct Client {
    ScriptedTransport* transport;
    std::vector<std::chrono::milliseconds> sleeps;
    std::unique_ptr<ff::HttpChatClient> client;
};

std::unique_ptr<Client> make_client(std::deque<Scripted> script) {
    auto c = std::make_unique<Client>();
    auto t = std::make_unique<ScriptedTransport>(std::move(script));
    c->transport = t.get();
    ff::HttpChatConfig cfg;
    cfg.base_url = "https://api.example.test/v1";
    auto* sleeps = &c->sleeps;
    c->client = std::make_unique<ff::HttpChatClient>(cfg, "sk-test", std::move(t),
                                                     [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); });
    return c;
}

const std::string kOkBody = ff::make_chat_body("m1", "hi there");

} // namespace

TEST(ChatRequest, WireBodyShape) {
    auto body = simple_request().wire_body();
    EXPECT_EQ(body["model"], "m1");
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "hello");
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.9);
    EXPECT_EQ(body["max_tokens"], 64);
    EXPECT_FALSE(body.contains("sample_index"));
    auto no_system = ff::make_request("m", std::nullopt, "u", {});
    EXPECT_EQ(no_system.wire_body()["messages"].size(), 1u);
}

TEST(ChatRequest, CacheKeyCoversEveryField) {
    auto base = simple_request();
    EXPECT_EQ(base.cache_key(), simple_request().cache_key());
    EXPECT_NE(base.cache_key(), simple_request(1).cache_key());
    auto t = base;
    t.temperature = 0.6;
    EXPECT_NE(base.cache_key(), t.cache_key());
    auto s = base;
    s.system.reset();
    EXPECT_NE(base.cache_key(), s.cache_key());
}

TEST(ChatRequest, ValidateRejectsBadDecoding) {
    auto r = simple_request();
    r.temperature = -1;
    EXPECT_THROW(r.validate(), ff::ContractError);
    r = simple_request();
    r.top_p = 1.5;
    EXPECT_THROW(r.validate(), ff::ContractError);
    r = simple_request();
    r.max_tokens = 0;
    EXPECT_THROW(r.validate(), ff::ContractError);
}

TEST(ParseChatBody, ReadsFirstChoice) {
    auto resp = ff::parse_chat_body(kOkBody);
    EXPECT_EQ(resp.text, "hi there");
    EXPECT_EQ(resp.finish_reason, "stop");
    EXPECT_THROW(ff::parse_chat_body("{}"), ff::ChatError);
    EXPECT_THROW(ff::parse_chat_body("not json"), ff::ChatError);
    EXPECT_THROW(ff::parse_chat_body(R"({"choices":[]})"), ff::ChatError);
}

TEST(RetryPolicy, ExponentialAndCapped) {
    ff::RetryPolicy p;
    EXPECT_EQ(p.delay_after(1), 500ms);
    EXPECT_EQ(p.delay_after(2), 1000ms);
    EXPECT_EQ(p.delay_after(4), 4000ms);
    EXPECT_EQ(p.delay_after(20), 30000ms);
}

TEST(HttpChatClient, RetriesRateLimitThenSucceeds) {
    auto c = make_client({{429, "slow down"}, {429, "slow down"}, {200, kOkBody}});
    auto resp = c->client->complete(simple_request());
    EXPECT_EQ(resp.text, "hi there");
    EXPECT_EQ(c->client->attempts(), 3u);
    EXPECT_EQ(c->sleeps, (std::vector<std::chrono::milliseconds>{500ms, 1000ms}));
    EXPECT_EQ(c->transport->last_path, "/v1/chat/completions");
    bool auth = false;
    for (const auto& [k, v] : c->transport->last_headers) auth |= k == "Authorization" && v == "Bearer sk-test";
    EXPECT_TRUE(auth);
}

TEST(HttpChatClient, RetriesServerErrorsAndConnectionFailures) {
    auto c = make_client({{503, ""}, {0, "", ff::ChatErrorKind::transport}, {200, kOkBody}});
    EXPECT_EQ(c->client->complete(simple_request()).text, "hi there");
    EXPECT_EQ(c->client->attempts(), 3u);
}

TEST(HttpChatClient, GivesUpAfterMaxAttempts) {
    auto c = make_client({{500, ""}, {502, ""}, {503, ""}, {504, ""}, {500, ""}, {200, kOkBody}});
    try {
        c->client->complete(simple_request());
        FAIL() << "expected ChatError";
    } catch (const ff::ChatError& e) {
        EXPECT_EQ(e.kind(), ff::ChatErrorKind::transport);
        EXPECT_EQ(e.attempts(), 5);
    }
    EXPECT_EQ(c->transport->posts, 5);
    EXPECT_EQ(c->sleeps.size(), 4u);
}

TEST(HttpChatClient, TimeoutIsNotRetried) {
    auto c = make_client({{0, "", ff::ChatErrorKind::timeout}, {200, kOkBody}});
    try {
        c->client->complete(simple_request());
        FAIL() << "expected timeout";
    } catch (const ff::ChatError& e) {
        EXPECT_EQ(e.kind(), ff::ChatErrorKind::timeout);
    }
    EXPECT_EQ(c->transport->posts, 1);
}

TEST(HttpChatClient, AuthAndClientErrorsAreNotRetried) {
    auto c = make_client({{401, ""}});
    try {
        c->client->complete(simple_request());
        FAIL();
    } catch (const ff::ChatError& e) {
        EXPECT_EQ(e.kind(), ff::ChatErrorKind::auth);
    }
    auto d = make_client({{400, "bad"}});
    EXPECT_THROW(d->client->complete(simple_request()), ff::ChatError);
    EXPECT_EQ(d->transport->posts, 1);
}

TEST(HttpChatClient, MalformedBodyIsProtocolError) {
    auto c = make_client({{200, "{\"nope\":1}"}});
    try {
        c->client->complete(simple_request());
        FAIL();
    } catch (const ff::ChatError& e) {
        EXPECT_EQ(e.kind(), ff::ChatErrorKind::protocol);
    }
}

TEST(HttpChatClient, SpeaksOpenAiWireFormatOverRealHttp) {
    httplib::Server server;
    std::mutex mu;
    ff::json seen_body;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        seen_body = ff::json::parse(req.body);
        seen_auth = req.get_header_value("Authorization");
        res.set_content(ff::make_chat_body(seen_body["model"].get<std::string>(), "served"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ff::HttpChatConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.timeout = 5000ms;
    ff::HttpChatClient client(cfg, "sk-live");
    auto resp = client.complete(simple_request());
    server.stop();
    th.join();

    EXPECT_EQ(resp.text, "served");
    EXPECT_EQ(seen_auth, "Bearer sk-live");
    EXPECT_EQ(seen_body["model"], "m1");
    EXPECT_EQ(seen_body["messages"][0]["content"], "sys");
    EXPECT_EQ(seen_body["max_tokens"], 64);
}

TEST(HttpChatClient, RefusedConnectionIsTransportError) {
    ff::HttpChatConfig cfg;
    cfg.base_url = "http://127.0.0.1:9/v1";
    cfg.timeout = 2000ms;
    cfg.retry.max_attempts = 2;
    ff::HttpChatClient client(cfg, "k", nullptr, [](std::chrono::milliseconds) {});
    try {
        client.complete(simple_request());
        FAIL();
    } catch (const ff::ChatError& e) {
        EXPECT_EQ(e.kind(), ff::ChatErrorKind::transport);
        EXPECT_EQ(e.attempts(), 2);
    }
}

TEST(ApiKey, ReadFromEnvironmentOnly) {
    ::unsetenv(ff::kApiKeyEnv);
    EXPECT_THROW(ff::api_key_from_env(), ff::ConfigError);
    ::setenv(ff::kApiKeyEnv, "abc", 1);
    EXPECT_EQ(ff::api_key_from_env(), "abc");
    ::unsetenv(ff::kApiKeyEnv);
}

TEST(MockClient, DeterministicPerSeedModelAndSample) {
    ff::MockClient a(1), b(1), c(2);
    auto r = simple_request();
    EXPECT_EQ(a.complete(r).text, b.complete(r).text);
    EXPECT_NE(a.complete(r).text, c.complete(r).text);
    EXPECT_NE(a.complete(r).text, a.complete(simple_request(3)).text);
    auto other = r;
    other.model = "m2";
    EXPECT_NE(a.complete(r).text, a.complete(other).text);
    EXPECT_EQ(a.calls(), 6u);
}

TEST(MockClient, AnnotationResponsesRoundTripThroughParser) {
    auto ins = ff::make_instruction(ff::SourceTag::custom, "Name a prime number.");
    std::vector<ff::Completion> group;
    for (int i = 0; i < 4; ++i) group.push_back({ins.id, "model" + std::to_string(i), {}, "", "answer " + std::to_string(i), {}, 2});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto aspect : ff::kRatingAspects) {
            auto req = ff::make_request("judge", std::string(ff::kFineGrainedSystemPrompt),
                                        ff::build_fine_grained_prompt(ins, group, aspect), {});
            auto expected = ff::mock_fine_grained_ratings(req, seed);
            ASSERT_EQ(expected.size(), 4u);
            auto parsed = ff::parse_ratings(ff::mock_generate(req, seed).text);
            for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(parsed[i].rating, expected[i]);
        }
        auto creq = ff::make_request("judge", std::nullopt, ff::build_critique_prompt(ins, group[0]), {});
        EXPECT_EQ(ff::parse_critique(ff::mock_generate(creq, seed).text).overall_score,
                  ff::mock_overall_score(creq, seed));
    }
}

TEST(CachingClient, SecondCallIsServedFromDisk) {
    auto dir = fs::temp_directory_path() / "ff_cache_test";
    fs::remove_all(dir);
    ff::MockClient mock(5);
    {
        ff::CachingClient cached(mock, ff::ResponseCache(dir), 2);
        auto first = cached.complete(simple_request());
        EXPECT_FALSE(first.from_cache);
        auto second = cached.complete(simple_request());
        EXPECT_TRUE(second.from_cache);
        EXPECT_EQ(first.text, second.text);
        EXPECT_EQ(cached.backend_calls(), 1u);
        EXPECT_EQ(cached.cache_hits(), 1u);
    }
    // A fresh client over the same directory reuses the stored response.
    ff::CachingClient again(mock, ff::ResponseCache(dir), 2);
    EXPECT_TRUE(again.complete(simple_request()).from_cache);
    EXPECT_EQ(mock.calls(), 1u);
    fs::remove_all(dir);
}

namespace {

class SlowCounting : public ff::ChatClient {
public:
    ff::ChatResponse complete(const ff::ChatRequest& req) override {
        int now = ++active;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(5ms);
        --active;
        ff::ChatResponse r;
        r.text = req.user;
        return r;
    }
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
};

} // namespace

TEST(CachingClient, BoundsInFlightCalls) {
    SlowCounting slow;
    ff::CachingClient bounded(slow, std::nullopt, 3);
    std::vector<std::thread> threads;
    for (int t = 0; t < 12; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 4; ++i) bounded.complete(ff::make_request("m", std::nullopt, std::to_string(t * 10 + i), {}));
        });
    for (auto& t : threads) t.join();
    EXPECT_LE(slow.peak.load(), 3);
    EXPECT_GE(slow.peak.load(), 2);
    EXPECT_EQ(bounded.backend_calls(), 48u);
}

TEST(RoutingClient, DispatchesByModel) {
    ff::MockClient a(1), b(2);
    ff::RoutingClient router;
    router.route("m1", a);
    EXPECT_NO_THROW(router.complete(simple_request()));
    EXPECT_THROW(router.complete(ff::make_request("zz", std::nullopt, "x", {})), ff::ConfigError);
    router.set_fallback(b);
    router.complete(ff::make_request("zz", std::nullopt, "x", {}));
    EXPECT_EQ(a.calls(), 1u);
    EXPECT_EQ(b.calls(), 1u);
}

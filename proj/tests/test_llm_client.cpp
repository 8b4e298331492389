#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "selfprompt/llm_client.hpp"
#include "test_util.hpp"

using namespace selfprompt;
using namespace selfprompt::llm;

namespace {

ClientConfig fast_config(const std::string& endpoint = "stub:test") {
    ClientConfig c;
    c.endpoint = endpoint;
    c.backoff_base = std::chrono::milliseconds(1);
    c.backoff_max = std::chrono::milliseconds(4);
    c.jitter_seed = 1;
    return c;
}

CompletionRequest req(const std::string& content) {
    CompletionRequest r;
    r.model = "m";
    r.messages = {{MessageRole::user, content}};
    return r;
}

std::shared_ptr<Transport> stub(StubHandler h) {
    return std::make_shared<StubTransport>(std::move(h));
}

}  // namespace

TEST(LlmClient, EchoOk) {
    LlmClient c(fast_config(), stub([](const CompletionRequest&) { return StubReply::text("OK"); }));
    const auto r = c.complete(req("hi"));
    EXPECT_EQ(r.content, "OK");
    EXPECT_EQ(r.finish_reason, FinishReason::stop);
    EXPECT_FALSE(r.raw.empty());
}

TEST(LlmClient, RetriesThenSucceeds) {
    std::atomic<int> calls{0};
    auto cfg = fast_config();
    cfg.max_retries = 3;
    LlmClient c(cfg, stub([&](const CompletionRequest&) {
                    return ++calls <= 2 ? StubReply::failure(503) : StubReply::text("fine");
                }));
    EXPECT_EQ(c.complete(req("x")).content, "fine");
    EXPECT_EQ(c.attempts_made(), 3u);
}

TEST(LlmClient, RetryExhaustion) {
    auto cfg = fast_config();
    cfg.max_retries = 1;
    LlmClient c(cfg, stub([](const CompletionRequest&) { return StubReply::failure(503); }));
    try {
        c.complete(req("x"));
        FAIL() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.last_status(), 503);
        EXPECT_EQ(e.attempts(), 2);
    }
    EXPECT_EQ(c.attempts_made(), 2u);
}

TEST(LlmClient, TimeoutsSurfaceAsTimeoutError) {
    auto cfg = fast_config();
    cfg.max_retries = 2;
    LlmClient c(cfg, stub([](const CompletionRequest&) {
                    StubReply r;
                    r.timeout = true;
                    return r;
                }));
    EXPECT_THROW(c.complete(req("x")), TimeoutError);
    EXPECT_EQ(c.attempts_made(), 3u);
}

TEST(LlmClient, NonRetryableStatusFailsFast) {
    auto cfg = fast_config();
    cfg.max_retries = 5;
    LlmClient c(cfg, stub([](const CompletionRequest&) { return StubReply::failure(400); }));
    EXPECT_THROW(c.complete(req("x")), ProtocolError);
    EXPECT_EQ(c.attempts_made(), 1u);
}

TEST(LlmClientProperty, AttemptBoundIsExact) {
    for (int retries = 0; retries <= 4; ++retries) {
        for (int failures = 0; failures <= 6; ++failures) {
            std::atomic<int> calls{0};
            auto cfg = fast_config();
            cfg.max_retries = retries;
            LlmClient c(cfg, stub([&](const CompletionRequest&) {
                            return calls++ < failures ? StubReply::failure(500) : StubReply::text("y");
                        }));
            const bool should_succeed = failures <= retries;
            if (should_succeed) {
                EXPECT_EQ(c.complete(req("q")).content, "y");
                EXPECT_EQ(c.attempts_made(), static_cast<std::uint64_t>(failures + 1));
            } else {
                EXPECT_THROW(c.complete(req("q")), TransportError);
                EXPECT_EQ(c.attempts_made(), static_cast<std::uint64_t>(retries + 1));
            }
        }
    }
}

TEST(LlmClient, DeterministicStubGivesIdenticalContent) {
    LlmClient c(fast_config(), stub([](const CompletionRequest& r) {
                    return StubReply::text("len=" + std::to_string(r.messages.back().content.size()));
                }));
    EXPECT_EQ(c.complete(req("abc")).content, c.complete(req("abc")).content);
}

TEST(LlmClient, ValidationErrors) {
    auto cfg = fast_config();
    cfg.max_concurrent = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = fast_config();
    cfg.backoff_base = std::chrono::milliseconds(0);
    EXPECT_THROW(cfg.validate(), ValidationError);
    LlmClient c(fast_config(), stub([](const CompletionRequest&) { return StubReply::text("x"); }));
    CompletionRequest empty;
    EXPECT_THROW(c.complete(empty), ValidationError);
}

TEST(LlmClientBatch, KeysPreserved) {
    LlmClient c(fast_config(), stub([](const CompletionRequest& r) { return StubReply::text(r.messages[0].content); }));
    std::map<std::string, CompletionRequest> reqs;
    for (int i = 0; i < 5; ++i) reqs["k" + std::to_string(i)] = req("v" + std::to_string(i));
    const auto out = c.complete_batch(reqs);
    ASSERT_EQ(out.size(), 5u);
    for (int i = 0; i < 5; ++i) {
        const auto& o = out.at("k" + std::to_string(i));
        ASSERT_TRUE(o.ok());
        EXPECT_EQ(o.response->content, "v" + std::to_string(i));
    }
}

TEST(LlmClientBatch, ConcurrencyBound) {
    std::atomic<int> in_flight{0}, peak{0};
    auto cfg = fast_config();
    cfg.max_concurrent = 2;
    LlmClient c(cfg, stub([&](const CompletionRequest&) {
                    const int now = ++in_flight;
                    int p = peak.load();
                    while (now > p && !peak.compare_exchange_weak(p, now)) {
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(20));
                    --in_flight;
                    return StubReply::text("x");
                }));
    std::map<std::string, CompletionRequest> reqs;
    for (int i = 0; i < 10; ++i) reqs[std::to_string(i)] = req("r");
    c.complete_batch(reqs);
    EXPECT_EQ(peak.load(), 2);
}

TEST(LlmClientBatch, FailureIsolated) {
    auto cfg = fast_config();
    cfg.max_retries = 1;
    LlmClient c(cfg, stub([](const CompletionRequest& r) {
                    return r.messages[0].content == "bad" ? StubReply::failure(500) : StubReply::text("ok");
                }));
    std::map<std::string, CompletionRequest> reqs = {
        {"a", req("a")}, {"b", req("b")}, {"c", req("bad")}, {"d", req("d")}, {"e", req("e")}};
    const auto out = c.complete_batch(reqs);
    EXPECT_FALSE(out.at("c").ok());
    EXPECT_EQ(out.at("c").error_kind, BatchErrorKind::protocol);
    EXPECT_EQ(out.at("c").last_status, 500);
    for (const char* k : {"a", "b", "d", "e"}) EXPECT_TRUE(out.at(k).ok()) << k;
}

TEST(LlmClientBatch, CompletionOrderDoesNotMatter) {
    // Sleeps invert the completion order relative to key order.
    auto make = [](bool reverse) {
        return stub([reverse](const CompletionRequest& r) {
            const int i = std::stoi(r.messages[0].content);
            std::this_thread::sleep_for(std::chrono::milliseconds(reverse ? 2 * (8 - i) : 2 * i));
            return StubReply::text("answer-" + std::to_string(i * i));
        });
    };
    std::map<std::string, CompletionRequest> reqs;
    for (int i = 0; i < 8; ++i) reqs["k" + std::to_string(i)] = req(std::to_string(i));
    auto cfg = fast_config();
    cfg.max_concurrent = 4;
    LlmClient a(cfg, make(false)), b(cfg, make(true));
    const auto ra = a.complete_batch(reqs);
    const auto rb = b.complete_batch(reqs);
    ASSERT_EQ(ra.size(), rb.size());
    for (const auto& [k, v] : ra) EXPECT_EQ(v.response->content, rb.at(k).response->content);
}

TEST(LlmClient, RegistryResolvesStubEndpoints) {
    StubRegistry::instance().add("unit-echo", [](const CompletionRequest&) { return StubReply::text("reg"); });
    LlmClient c(fast_config("stub:unit-echo"));
    EXPECT_EQ(c.complete(req("x")).content, "reg");
    StubRegistry::instance().remove("unit-echo");
    EXPECT_THROW(LlmClient(fast_config("stub:unit-echo")), ValidationError);
}

TEST(LlmClient, AuditLogRecordsEveryAttempt) {
    std::atomic<int> calls{0};
    auto audit = std::make_shared<AuditLog>();
    auto cfg = fast_config();
    cfg.max_retries = 2;
    LlmClient c(cfg, stub([&](const CompletionRequest&) {
                    return ++calls == 1 ? StubReply::failure(502) : StubReply::text("z");
                }),
                audit);
    c.complete(req("x"));
    const auto entries = audit->entries();
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].status, 502);
    EXPECT_EQ(entries[1].status, 200);
    EXPECT_EQ(entries[1].attempt, 2);
    EXPECT_NE(entries[0].request.find("\"messages\""), std::string::npos);
}

TEST(LlmClient, ParseCompletionBody) {
    const auto r = parse_completion_body(
        R"({"choices":[{"index":0,"message":{"role":"assistant","content":"hello"},"finish_reason":"length"}]})");
    EXPECT_EQ(r.content, "hello");
    EXPECT_EQ(r.finish_reason, FinishReason::length);
    EXPECT_ANY_THROW(parse_completion_body("{}"));
}

TEST(LlmClientHttp, WireProtocolAgainstLocalServer) {
    httplib::Server server;
    std::string seen_auth, seen_body;
    std::mutex mu;
    server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
        {
            std::lock_guard lock(mu);
            seen_auth = rq.get_header_value("Authorization");
            seen_body = rq.body;
        }
        const auto j = nlohmann::json::parse(rq.body);
        nlohmann::json out;
        out["choices"] = {{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", "echo:" + j["messages"][0]["content"].get<std::string>()}}},
                           {"finish_reason", "stop"}}};
        rs.set_content(out.dump(), "application/json");
    });
    server.Post("/flaky", [&](const httplib::Request&, httplib::Response& rs) { rs.status = 503; rs.body = "busy"; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("SELFPROMPT_TEST_TOKEN", "secret", 1);
    auto cfg = fast_config("http://127.0.0.1:" + std::to_string(port));
    cfg.auth_env = "SELFPROMPT_TEST_TOKEN";
    cfg.request_timeout = std::chrono::milliseconds(5000);
    LlmClient c(cfg);
    auto r = req("ping");
    r.temperature = 0.0;
    r.max_tokens = 7;
    EXPECT_EQ(c.complete(r).content, "echo:ping");
    {
        std::lock_guard lock(mu);
        EXPECT_EQ(seen_auth, "Bearer secret");
        const auto body = nlohmann::json::parse(seen_body);
        EXPECT_EQ(body["model"], "m");
        EXPECT_EQ(body["temperature"], 0.0);
        EXPECT_EQ(body["max_tokens"], 7);
        EXPECT_EQ(body["messages"][0]["role"], "user");
    }

    auto flaky = fast_config("http://127.0.0.1:" + std::to_string(port) + "/flaky");
    flaky.max_retries = 1;
    LlmClient f(flaky);
    try {
        f.complete(req("x"));
        FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.last_status(), 503);
        EXPECT_NE(e.body_excerpt().find("busy"), std::string::npos);
    }

    server.stop();
    th.join();

    auto missing = fast_config("http://127.0.0.1:1");
    missing.auth_env = "SELFPROMPT_TEST_TOKEN_UNSET";
    ::unsetenv("SELFPROMPT_TEST_TOKEN_UNSET");
    EXPECT_THROW(LlmClient{missing}, ValidationError);
}

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "hallucheck/digest.hpp"
#include "hallucheck/errors.hpp"
#include "hallucheck/http_backends.hpp"
#include "hallucheck/http_util.hpp"
#include "hallucheck/mock_backend.hpp"
#include "hallucheck/provider.hpp"
#include "support.hpp"

using namespace hallucheck;
using namespace hallucheck::provider;
using testing_support::MockClient;
using testing_support::TempDir;

namespace {

ClientOptions fast_retry(int attempts = 3) {
  ClientOptions o;
  o.retry.max_attempts = attempts;
  o.retry.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

ChatRequest req(const std::string& content, GenerationParams p = detect_profile(), std::string model = "gpt-4o") {
  return ChatRequest::user(std::move(model), content, p);
}

}  // namespace

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(GenerationParams, TableProfiles) {
  const auto kg = kg_profile();
  EXPECT_EQ(kg.temperature, 0.0);
  EXPECT_EQ(kg.top_p, 1.0);
  EXPECT_EQ(kg.max_tokens, 8096);
  EXPECT_EQ(kg.frequency_penalty, 1.0);
  EXPECT_EQ(kg.presence_penalty, 1.0);
  const auto d = detect_profile();
  EXPECT_EQ(d.temperature, 1.0);
  EXPECT_EQ(d.top_p, 1.0);
  EXPECT_EQ(d.max_tokens, 8096);
  EXPECT_EQ(d.frequency_penalty, 0.0);
  EXPECT_EQ(d.presence_penalty, 0.0);
}

TEST(GenerationParams, Validation) {
  GenerationParams p;
  EXPECT_NO_THROW(p.validate());
  p.temperature = -0.1;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = {};
  p.top_p = 0.0;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = {};
  p.max_tokens = 0;
  EXPECT_THROW(p.validate(), PreconditionError);
}

TEST(ChatRequest, Validation) {
  ChatRequest r;
  r.model_id = "m";
  EXPECT_THROW(r.validate(), ConfigError);  // empty messages
  r.messages.push_back({Role::assistant, "hi"});
  EXPECT_THROW(r.validate(), ConfigError);  // last turn not user
  r.messages.push_back({Role::user, "hello"});
  EXPECT_NO_THROW(r.validate());
}

TEST(CacheKey, DeterministicAndFieldSensitive) {
  const auto a = req("What is 2+2?");
  EXPECT_EQ(cache_key("mock", a), cache_key("mock", req("What is 2+2?")));
  EXPECT_EQ(cache_key("mock", a).size(), 64u);

  auto t0 = a;
  t0.params.temperature = 0.0;
  EXPECT_NE(cache_key("mock", a), cache_key("mock", t0));
  EXPECT_NE(cache_key("mock", a), cache_key("mock", req("What is 2+2?", detect_profile(), "gemini-pro")));
  EXPECT_NE(cache_key("mock", a), cache_key("openai", a));
  EXPECT_NE(cache_key("mock", a), cache_key("mock", req("What is 2+3?")));
  EXPECT_NE(cache_key("mock", a), cache_key("mock", a, "sample:0:0"));
}

TEST(MockBackend, ScriptedConfidence) {
  MockScript s;
  s.on("CONFIDENCE", "0.85");
  s.default_reply = "fallback";
  MockClient c(s);
  EXPECT_EQ(c->complete(req("CONFIDENCE please")).content, "0.85");
  EXPECT_EQ(c->complete(req("other")).content, "fallback");
}

TEST(MockBackend, FirstMatchWinsAndAllSubstringsRequired) {
  MockScript s;
  s.on(std::vector<std::string>{"A", "B"}, "both");
  s.on("A", "only-a");
  s.default_reply = "none";
  MockClient c(s);
  EXPECT_EQ(c->complete(req("x A y B")).content, "both");
  EXPECT_EQ(c->complete(req("x A y")).content, "only-a");
  EXPECT_EQ(c->complete(req("x")).content, "none");
}

TEST(MockBackend, ReplySequencesCycle) {
  auto s = MockScript::from_json(nlohmann::json::parse(R"({"rules":[{"match":"Q","replies":["1","2"]}],"default":"d"})"));
  MockClient c(s);
  EXPECT_EQ(c.backend->send(req("Q")).content, "1");
  EXPECT_EQ(c.backend->send(req("Q")).content, "2");
  EXPECT_EQ(c.backend->send(req("Q")).content, "1");
  EXPECT_EQ(c.backend->calls(), 3u);
  EXPECT_EQ(c.backend->history().size(), 3u);
}

TEST(MockBackend, UnknownModelIsConfigError) {
  MockScript s;
  s.default_reply = "ok";
  s.models = {"gpt-4o"};
  MockClient c(s);
  EXPECT_NO_THROW(c->complete(req("x")));
  EXPECT_THROW(c->complete(req("x", detect_profile(), "other-model")), ConfigError);
}

TEST(MockBackend, Generators) {
  EXPECT_EQ(naive_triples_reply("Alan Turing was born in London"), R"([["Alan Turing","was","born in London"]])");
  const auto h = hash_score_reply("anything");
  EXPECT_EQ(h, hash_score_reply("anything"));
  const double v = std::stod(h);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST(MockScript, LoadRejectsBadFiles) {
  TempDir dir;
  testing_support::write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(MockScript::load(dir / "bad.json"), ConfigError);
  EXPECT_THROW(MockScript::load(dir / "missing.json"), ConfigError);
  testing_support::write_file(dir / "gen.json", R"({"rules":[{"match":"x","generator":"telepathy"}]})");
  EXPECT_THROW(MockScript::load(dir / "gen.json"), ConfigError);
}

TEST(LlmClient, EmptyMessagesIsPrecondition) {
  MockClient c(MockScript{});
  ChatRequest r;
  r.model_id = "m";
  EXPECT_THROW(c->complete(r), ConfigError);
}

TEST(LlmClient, CacheRoundTrip) {
  TempDir dir;
  MockScript s;
  s.default_generator = MockGenerator::hash_score;
  auto opts = fast_retry();
  opts.cache_dir = dir.path();
  MockClient c(s, opts);
  const auto first = c->complete(req("score this"));
  const auto second = c->complete(req("score this"));
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(first.content, second.content);
  EXPECT_EQ(c.backend->calls(), 1u);

  // A fresh client over the same directory reads the stored response.
  MockClient again(s, opts);
  EXPECT_TRUE(again->complete(req("score this")).cached);
  EXPECT_EQ(again.backend->calls(), 0u);

  ResponseCache cache(dir.path());
  ASSERT_EQ(cache.manifest().size(), 1u);
  const auto digest = cache.manifest()[0];
  EXPECT_EQ(digest, c->cache_key(req("score this")));
  const auto record = nlohmann::json::parse(testing_support::read_file(dir / (digest + ".json")));
  EXPECT_EQ(record.at("response").get<std::string>(), first.content);
  EXPECT_TRUE(record.contains("request"));
  EXPECT_TRUE(record.contains("timestamp"));
}

TEST(LlmClient, CacheRoundTripProperty) {
  TempDir dir;
  MockScript s;
  s.default_generator = MockGenerator::hash_score;
  auto opts = fast_retry();
  opts.cache_dir = dir.path();
  MockClient c(s, opts);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto text = testing_support::random_phrase(rng, 6);
    const auto a = c->complete(req(text));
    const auto b = c->complete(req(text));
    EXPECT_EQ(a.content, b.content);
    EXPECT_TRUE(b.cached);
  }
}

TEST(LlmClient, CorruptCacheEntryIsAMiss) {
  TempDir dir;
  MockScript s;
  s.default_reply = "fresh";
  auto opts = fast_retry();
  opts.cache_dir = dir.path();
  MockClient c(s, opts);
  const auto key = c->cache_key(req("q"));
  testing_support::write_file(dir / (key + ".json"), "{broken");
  const auto r = c->complete(req("q"));
  EXPECT_FALSE(r.cached);
  EXPECT_EQ(r.content, "fresh");
}

TEST(LlmClient, RetriesTransportErrors) {
  MockScript s;
  s.default_reply = "ok";
  s.fail_on_calls = {1, 2};
  MockClient c(s, fast_retry());
  EXPECT_EQ(c->complete(req("x")).content, "ok");
  EXPECT_EQ(c.backend->calls(), 3u);
}

TEST(LlmClient, TransportErrorAfterBudget) {
  MockScript s;
  s.default_reply = "ok";
  s.fail_on_calls = {1, 2, 3};
  MockClient c(s, fast_retry());
  EXPECT_THROW(c->complete(req("x")), TransportError);
  EXPECT_EQ(c.backend->calls(), 3u);
  EXPECT_EQ(c->backend_calls(), 3u);
}

TEST(LlmClient, DefaultRetryPolicy) {
  RetryPolicy p;
  EXPECT_EQ(p.max_attempts, 3);
  EXPECT_EQ(p.initial_backoff, std::chrono::milliseconds(1000));
  EXPECT_EQ(p.multiplier, 2.0);
}

TEST(LlmClient, RefusalIsNotRetried) {
  MockScript s;
  s.default_reply = "ok";
  s.fail_on_calls = {1};
  s.fail_kind = MockFailure::refusal;
  MockClient c(s, fast_retry());
  EXPECT_THROW(c->complete(req("x")), ProviderRefusal);
  EXPECT_EQ(c.backend->calls(), 1u);
}

TEST(LlmClient, BlankContentIsRefusal) {
  MockScript s;
  s.default_reply = "   ";
  MockClient c(s, fast_retry());
  EXPECT_THROW(c->complete(req("x")), ProviderRefusal);
}

TEST(SampleN, FollowsScriptedSequence) {
  nlohmann::json replies = nlohmann::json::array();
  for (int i = 0; i < 20; ++i) replies.push_back("sample " + std::to_string(i));
  auto s = MockScript::from_json({{"rules", {{{"match", "write"}, {"replies", replies}}}}});
  MockClient c(s, fast_retry());
  const auto out = c->sample_n(req("write a passage"), 20);
  ASSERT_EQ(out.size(), 20u);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(out[i].content, "sample " + std::to_string(i));
}

TEST(SampleN, ZeroIsPrecondition) {
  MockClient c(MockScript{}, fast_retry());
  EXPECT_THROW(c->sample_n(req("x"), 0), PreconditionError);
}

TEST(SampleN, PartialFailureReportsSuccesses) {
  MockScript s;
  s.default_reply = "ok";
  s.fail_on_calls = {2};
  s.fail_kind = MockFailure::refusal;
  MockClient c(s, fast_retry());
  try {
    c->sample_n(req("x"), 3);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_EQ(e.succeeded(), 1u);
  }
}

TEST(SampleN, BypassesCacheReadsButRecords) {
  TempDir dir;
  MockScript s;
  s.rules.push_back({{"x"}, {"a", "b", "c", "d"}});
  auto opts = fast_retry();
  opts.cache_dir = dir.path();
  MockClient c(s, opts);
  const auto first = c->sample_n(req("x"), 2);
  const auto second = c->sample_n(req("x"), 2);
  EXPECT_EQ(first[0].content, "a");
  EXPECT_EQ(second[0].content, "c");
  EXPECT_FALSE(second[0].cached);
  EXPECT_EQ(c.backend->calls(), 4u);
  EXPECT_EQ(ResponseCache(dir.path()).manifest().size(), 4u);
}

TEST(LlmClient, ConcurrentCompletes) {
  TempDir dir;
  MockScript s;
  s.default_generator = MockGenerator::hash_score;
  auto opts = fast_retry();
  opts.cache_dir = dir.path();
  MockClient c(s, opts);
  std::vector<std::jthread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) {
        const auto text = "q" + std::to_string(i % 10);
        try {
          const auto r = c->complete(req(text));
          if (r.content.empty()) ++failures;
        } catch (...) {
          ++failures;
        }
      }
    });
  }
  threads.clear();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(ResponseCache(dir.path()).manifest().size(), 10u);
}

TEST(RateLimiter, SpacesRequests) {
  RateLimiter limiter(60.0 * 50);  // 20 ms apart
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 4; ++i) limiter.acquire();
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(55));
}

// ---------------------------------------------------------------------------
// Wire formats against a local server

namespace {

class LocalServer {
public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

}  // namespace

TEST(HttpUtil, ParseBaseUrl) {
  auto e = http::parse_base_url("https://api.openai.com");
  EXPECT_EQ(e.scheme_host_port, "https://api.openai.com");
  EXPECT_EQ(e.prefix, "");
  e = http::parse_base_url("http://127.0.0.1:8080/proxy/");
  EXPECT_EQ(e.scheme_host_port, "http://127.0.0.1:8080");
  EXPECT_EQ(e.prefix, "/proxy");
  EXPECT_THROW(http::parse_base_url("ftp://x"), ConfigError);
  EXPECT_THROW(http::parse_base_url("nohost"), ConfigError);
}

TEST(OpenAIBackend, WireFormat) {
  LocalServer srv;
  nlohmann::json seen;
  std::string auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    seen = nlohmann::json::parse(rq.body);
    auth = rq.get_header_value("Authorization");
    rs.set_content(R"({"choices":[{"message":{"role":"assistant","content":"0.42"},"finish_reason":"stop"}],
                      "usage":{"prompt_tokens":7,"completion_tokens":1}})",
                   "application/json");
  });
  auto backend = make_openai_backend({srv.url(), "sk-test", 5});
  const auto r = backend->send(req("Is this true?", kg_profile()));
  EXPECT_EQ(r.content, "0.42");
  EXPECT_EQ(r.provider_meta.at("prompt_tokens"), "7");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen["model"], "gpt-4o");
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "Is this true?");
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["max_tokens"], 8096);
  EXPECT_EQ(seen["frequency_penalty"], 1.0);
  EXPECT_EQ(seen["presence_penalty"], 1.0);
}

TEST(GeminiBackend, WireFormat) {
  LocalServer srv;
  nlohmann::json seen;
  std::string key, path;
  srv.server().Post(R"(/v1beta/models/(.+):generateContent)", [&](const httplib::Request& rq, httplib::Response& rs) {
    seen = nlohmann::json::parse(rq.body);
    key = rq.get_header_value("x-goog-api-key");
    path = rq.matches[1];
    rs.set_content(R"({"candidates":[{"content":{"parts":[{"text":"0."},{"text":"9"}]},"finishReason":"STOP"}]})",
                   "application/json");
  });
  auto backend = make_gemini_backend({srv.url(), "g-key", 5});
  ChatRequest r = req("Rate it", detect_profile(), "gemini-1.5-pro");
  r.messages.insert(r.messages.begin(), Message{Role::system, "Be terse."});
  const auto out = backend->send(r);
  EXPECT_EQ(out.content, "0.9");
  EXPECT_EQ(key, "g-key");
  EXPECT_EQ(path, "gemini-1.5-pro");
  EXPECT_EQ(seen["contents"][0]["parts"][0]["text"], "Rate it");
  EXPECT_EQ(seen["systemInstruction"]["parts"][0]["text"], "Be terse.");
  EXPECT_EQ(seen["generationConfig"]["temperature"], 1.0);
  EXPECT_EQ(seen["generationConfig"]["maxOutputTokens"], 8096);
}

TEST(HttpBackends, StatusMapping) {
  LocalServer srv;
  std::atomic<int> hits{0};
  int status = 500;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& rs) {
    ++hits;
    rs.status = status;
    rs.set_content(R"({"error":"x"})", "application/json");
  });
  auto backend = make_openai_backend({srv.url(), "k", 5});
  status = 503;
  EXPECT_THROW(backend->send(req("x")), TransportError);
  status = 429;
  EXPECT_THROW(backend->send(req("x")), TransportError);
  status = 401;
  EXPECT_THROW(backend->send(req("x")), ConfigError);
  status = 404;
  EXPECT_THROW(backend->send(req("x")), ConfigError);
  status = 400;
  EXPECT_THROW(backend->send(req("x")), ProviderRefusal);
  EXPECT_EQ(hits.load(), 5);
}

TEST(HttpBackends, RetryThroughClientThenSuccess) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& rs) {
    if (++hits < 3) {
      rs.status = 502;
      return;
    }
    rs.set_content(R"({"choices":[{"message":{"content":"done"}}]})", "application/json");
  });
  LlmClient client(make_openai_backend({srv.url(), "k", 5}), fast_retry());
  EXPECT_EQ(client.complete(req("x")).content, "done");
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpBackends, NoServerIsTransportError) {
  auto backend = make_openai_backend({"http://127.0.0.1:1", "k", 1});
  EXPECT_THROW(backend->send(req("x")), TransportError);
}

TEST(HttpBackends, MissingKeyIsConfigError) {
  ::unsetenv("HALLUCHECK_OPENAI_KEY");
  ::unsetenv("HALLUCHECK_GEMINI_KEY");
  EXPECT_THROW(make_openai_backend({}), ConfigError);
  EXPECT_THROW(make_gemini_backend({}), ConfigError);
}

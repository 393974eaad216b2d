#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "hallucheck/embed.hpp"
#include "hallucheck/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hallucheck;
using namespace hallucheck::embed;

TEST(Cosine, BasicCases) {
  const std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_DOUBLE_EQ(cosine_sim(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(x, y), 0.0);
  EXPECT_NEAR(cosine_sim(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}), 0.9746318, 1e-6);
  EXPECT_DOUBLE_EQ(cosine_sim(std::vector<double>{1, 0}, std::vector<double>{-1, 0}), -1.0);
}

TEST(Cosine, HandComputedOracle) {
  // 32 / (sqrt(14) * sqrt(77))
  const double expected = 32.0 / std::sqrt(14.0 * 77.0);
  EXPECT_NEAR(expected, 0.9746318, 1e-7);
  EXPECT_NEAR(cosine_sim(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}), expected, 1e-15);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine_sim(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), DimensionMismatch);
  EXPECT_THROW(cosine_sim(std::vector<double>{0, 0}, std::vector<double>{1, 2}), ZeroVector);
  EXPECT_THROW(cosine_sim(std::vector<double>{1, 2}, std::vector<double>{0, 0}), ZeroVector);
}

TEST(Cosine, AgreesWithOracleOnRandomVectors) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const auto a = testing_support::random_vector(rng, 1 + i % 50);
    const auto b = testing_support::random_vector(rng, 1 + i % 50);
    const double s = cosine_sim(a, b);
    EXPECT_NEAR(s, oracle::cosine(a, b), 1e-12);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(TripleText, SpaceJoin) {
  EXPECT_EQ(triple_text(Triple("Alan Turing", "born in", "London")), "Alan Turing born in London");
  const std::string s = "Alan Turing was born in 1912.";
  EXPECT_EQ(triple_text(KnowledgeGraph(s, {}).triples()[0]), "statement states " + s);
  EXPECT_EQ(triple_text(Triple("New  York", "is in", "the  USA")), "New  York is in the  USA");
}

TEST(MockEmbedder, DeterministicAndDimensioned) {
  MockEmbedder e(16, 1);
  const auto a = e.embed("Alan Turing was born in London.");
  const auto b = e.embed("Alan Turing was born in London.");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a.model_id, "mock-embed");
  bool nonzero = false;
  for (double x : a.values) {
    nonzero |= x != 0.0;
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_TRUE(nonzero);
}

TEST(MockEmbedder, FixedVectors) {
  MockEmbedder e(2);
  e.set("o", {1, 0});
  e.set("s", {0, 1});
  EXPECT_EQ(e.embed("o").values, (std::vector<double>{1, 0}));
  EXPECT_EQ(e.embed("s").values, (std::vector<double>{0, 1}));
  EXPECT_THROW(e.set("bad", {1, 2, 3}), DimensionMismatch);
}

TEST(MockEmbedder, SpecFile) {
  testing_support::TempDir dir;
  testing_support::write_file(dir / "spec.json",
                              R"({"model_id":"m1","dimension":3,"seed":9,"vectors":{"hello":[1,2,3]}})");
  auto e = MockEmbedder::load(dir / "spec.json");
  EXPECT_EQ(e->model_id(), "m1");
  EXPECT_EQ(e->dimension(), 3u);
  EXPECT_EQ(e->embed("hello").values, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(e->embed("other").size(), 3u);
  EXPECT_THROW(MockEmbedder::load(dir / "missing.json"), ConfigError);
}

TEST(MockEmbedder, SharedTokensRaiseSimilarity) {
  MockEmbedder e(128, 0);
  const double near = cosine_sim(e.embed("Alan Turing born London"), e.embed("Alan Turing born Manchester"));
  const double far = cosine_sim(e.embed("Alan Turing born London"), e.embed("photosynthesis chlorophyll leaf"));
  EXPECT_GT(near, far);
  EXPECT_NEAR(cosine_sim(e.embed("Alan  TURING"), e.embed("alan turing")), 1.0, 1e-12);
}

TEST(Embedder, BlankTextIsPrecondition) {
  MockEmbedder e(4);
  EXPECT_THROW(e.embed(""), PreconditionError);
  EXPECT_THROW(e.embed("   "), PreconditionError);
}

namespace {

class CountingEmbedder final : public Embedder {
public:
  std::atomic<int> calls{0};
  std::size_t returned_dim = 3;
  std::string model_id() const override { return "counting"; }
  std::size_t dimension() const override { return 3; }

protected:
  std::vector<double> compute(std::string_view text) override {
    ++calls;
    std::vector<double> v(returned_dim, 0.0);
    v[0] = static_cast<double>(text.size());
    return v;
  }
};

}  // namespace

TEST(Embedder, WrongBackendLengthIsDimensionMismatch) {
  CountingEmbedder e;
  e.returned_dim = 2;
  EXPECT_THROW(e.embed("x"), DimensionMismatch);
}

TEST(MemoEmbedder, MemoizesAcrossThreads) {
  auto inner = std::make_shared<CountingEmbedder>();
  MemoEmbedder memo(inner);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) memo.embed("text " + std::to_string(i % 5));
    });
  }
  threads.clear();
  EXPECT_EQ(memo.memo_size(), 5u);
  EXPECT_LE(inner->calls.load(), 20);  // racing first lookups may compute twice
  EXPECT_EQ(memo.embed("text 1").values, inner->embed("text 1").values);
}

TEST(HttpEmbedder, WireFormatAndErrors) {
  httplib::Server srv;
  const int port = srv.bind_to_any_port("127.0.0.1");
  nlohmann::json seen;
  int status = 200;
  srv.Post("/v1/embeddings", [&](const httplib::Request& rq, httplib::Response& rs) {
    seen = nlohmann::json::parse(rq.body);
    rs.status = status;
    rs.set_content(R"({"data":[{"embedding":[0.5,0.25,0.0]}]})", "application/json");
  });
  std::jthread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  const std::string url = "http://127.0.0.1:" + std::to_string(port);

  HttpEmbedder e(url, "all-MiniLM-L6-v2", 3);
  EXPECT_EQ(e.embed("hello").values, (std::vector<double>{0.5, 0.25, 0.0}));
  EXPECT_EQ(seen["model"], "all-MiniLM-L6-v2");
  EXPECT_EQ(seen["input"], "hello");

  HttpEmbedder wrong(url, "m", 4);
  EXPECT_THROW(wrong.embed("hello"), DimensionMismatch);

  status = 503;
  EXPECT_THROW(e.embed("hello"), EmbedBackendError);
  srv.stop();

  HttpEmbedder down("http://127.0.0.1:1", "m", 3);
  EXPECT_THROW(down.embed("x"), EmbedBackendError);
}

TEST(EmbedDefaults, PaperModel) {
  EXPECT_EQ(kDefaultModel, "all-MiniLM-L6-v2");
  EXPECT_EQ(kDefaultDimension, 384u);
}

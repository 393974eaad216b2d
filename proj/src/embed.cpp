#include "hallucheck/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "hallucheck/errors.hpp"
#include "hallucheck/http_util.hpp"

namespace hallucheck::embed {

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine_sim: dimensions " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine_sim: zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine_sim(a.values, b.values); }

std::string triple_text(const Triple& t) { return t.subject() + " " + t.relation() + " " + t.object(); }

EmbeddingVector Embedder::embed(std::string_view text) {
  if (trim(text).empty()) throw PreconditionError("embed needs non-empty text");
  auto values = compute(text);
  if (values.size() != dimension()) {
    throw DimensionMismatch("embedder " + model_id() + " returned " + std::to_string(values.size()) +
                            " components, expected " + std::to_string(dimension()));
  }
  return {std::move(values), model_id()};
}

// ---------------------------------------------------------------------------
// MockEmbedder

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::string> tokens_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in(normalize_text(text));
  for (std::string w; in >> w;) {
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    while (!w.empty() && is_punct(w.back())) w.pop_back();
    while (!w.empty() && is_punct(w.front())) w.erase(w.begin());
    if (!w.empty()) out.push_back(std::move(w));
  }
  if (out.empty()) out.emplace_back(text);
  return out;
}

}  // namespace

MockEmbedder::MockEmbedder(std::size_t dimension, std::uint64_t seed, std::string model_id)
    : dimension_(dimension), seed_(seed), model_id_(std::move(model_id)) {
  if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::unique_ptr<MockEmbedder> MockEmbedder::from_json(const nlohmann::json& spec) {
  try {
    auto e = std::make_unique<MockEmbedder>(spec.value("dimension", kDefaultDimension),
                                            spec.value("seed", std::uint64_t{0}),
                                            spec.value("model_id", std::string("mock-embed")));
    const auto vectors = spec.value("vectors", nlohmann::json::object());
    for (const auto& [text, vec] : vectors.items()) {
      e->set(text, vec.get<std::vector<double>>());
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed mock embedding spec: ") + ex.what());
  }
}

std::unique_ptr<MockEmbedder> MockEmbedder::load(const std::filesystem::path& spec) {
  std::ifstream in(spec);
  if (!in) throw ConfigError("cannot open mock embedding spec " + spec.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("mock embedding spec " + spec.string() + " is not valid JSON: " + e.what());
  }
}

void MockEmbedder::set(std::string text, std::vector<double> values) {
  if (values.size() != dimension_) {
    throw DimensionMismatch("fixed vector for '" + text + "' has " + std::to_string(values.size()) +
                            " components, expected " + std::to_string(dimension_));
  }
  fixed_[std::move(text)] = std::move(values);
}

std::vector<double> MockEmbedder::hashed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  for (const auto& tok : tokens_of(text)) {
    const std::uint64_t base = fnv1a64(tok) ^ splitmix64(seed_);
    for (std::size_t i = 0; i < dimension_; ++i) {
      const std::uint64_t h = splitmix64(base + i);
      v[i] += static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;  // uniform in [-1, 1)
    }
  }
  double max_abs = 0.0;
  for (double x : v) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= max_abs;
  return v;
}

std::vector<double> MockEmbedder::compute(std::string_view text) {
  if (auto it = fixed_.find(std::string(text)); it != fixed_.end()) return it->second;
  return hashed(text);
}

// ---------------------------------------------------------------------------
// HttpEmbedder

HttpEmbedder::HttpEmbedder(std::string base_url, std::string model_id, std::size_t dimension, std::string api_key)
    : base_url_(std::move(base_url)), model_id_(std::move(model_id)), dimension_(dimension), api_key_(std::move(api_key)) {
  if (api_key_.empty()) {
    if (const char* k = std::getenv("HALLUCHECK_EMBED_KEY"); k && *k) api_key_ = k;
  }
  http::parse_base_url(base_url_);
}

std::vector<double> HttpEmbedder::compute(std::string_view text) {
  const auto ep = http::parse_base_url(base_url_);
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  nlohmann::json reply;
  try {
    reply = http::post_json(ep, ep.prefix + "/v1/embeddings", {{"model", model_id_}, {"input", std::string(text)}},
                            headers, 60);
  } catch (const Error& e) {
    throw EmbedBackendError(std::string("embedding backend: ") + e.what());
  }
  try {
    return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw EmbedBackendError(std::string("unexpected embeddings reply: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// MemoEmbedder

MemoEmbedder::MemoEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("MemoEmbedder needs an inner embedder");
}

std::size_t MemoEmbedder::memo_size() const {
  std::shared_lock lock(mutex_);
  return memo_.size();
}

std::vector<double> MemoEmbedder::compute(std::string_view text) {
  auto key = std::make_pair(inner_->model_id(), std::string(text));
  {
    std::shared_lock lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  auto v = inner_->embed(text).values;
  std::unique_lock lock(mutex_);
  return memo_.try_emplace(std::move(key), std::move(v)).first->second;
}

}  // namespace hallucheck::embed

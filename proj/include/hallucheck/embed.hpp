#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hallucheck/core.hpp"

namespace hallucheck::embed {

inline constexpr std::string_view kDefaultModel = "all-MiniLM-L6-v2";
inline constexpr std::size_t kDefaultDimension = 384;

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// dot(a,b) / (|a| |b|). Throws DimensionMismatch or ZeroVector.
double cosine_sim(std::span<const double> a, std::span<const double> b);
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

/// "subject relation object", fields verbatim.
std::string triple_text(const Triple& t);

/// Sentence embedding backend. embed() must be deterministic for a fixed model
/// and safe to call concurrently.
class Embedder {
public:
  virtual ~Embedder() = default;
  virtual std::string model_id() const = 0;
  virtual std::size_t dimension() const = 0;

  /// Throws PreconditionError on blank text, DimensionMismatch when the backend
  /// returns the wrong length, EmbedBackendError when it is unavailable.
  EmbeddingVector embed(std::string_view text);

protected:
  virtual std::vector<double> compute(std::string_view text) = 0;
};

/// Offline embedder. Texts listed in the spec map to their fixed vectors;
/// anything else gets a hashed bag-of-words vector: each normalized token is
/// expanded by a seeded hash into `dimension` components in [-1,1], the token
/// vectors are summed and rescaled so the largest component has magnitude 1.
/// Shared tokens therefore give positive similarity.
///
/// Spec file (JSON): {"model_id": "...", "dimension": 8, "seed": 0,
///                    "vectors": {"exact text": [..], ...}}
class MockEmbedder final : public Embedder {
public:
  explicit MockEmbedder(std::size_t dimension = kDefaultDimension, std::uint64_t seed = 0,
                        std::string model_id = "mock-embed");

  static std::unique_ptr<MockEmbedder> load(const std::filesystem::path& spec);
  static std::unique_ptr<MockEmbedder> from_json(const nlohmann::json& spec);

  /// Pins `text` to `values`. Throws DimensionMismatch on wrong length.
  void set(std::string text, std::vector<double> values);

  std::string model_id() const override { return model_id_; }
  std::size_t dimension() const override { return dimension_; }

  std::vector<double> hashed(std::string_view text) const;

protected:
  std::vector<double> compute(std::string_view text) override;

private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::string model_id_;
  std::unordered_map<std::string, std::vector<double>> fixed_;
};

/// OpenAI-compatible `POST {base}/v1/embeddings` (OpenAI, text-embeddings-inference,
/// Ollama and similar servers). Optional credential: HALLUCHECK_EMBED_KEY.
class HttpEmbedder final : public Embedder {
public:
  HttpEmbedder(std::string base_url, std::string model_id, std::size_t dimension, std::string api_key = {});

  std::string model_id() const override { return model_id_; }
  std::size_t dimension() const override { return dimension_; }

protected:
  std::vector<double> compute(std::string_view text) override;

private:
  std::string base_url_;
  std::string model_id_;
  std::size_t dimension_;
  std::string api_key_;
};

/// Memoizes another embedder by (model_id, text); concurrent readers,
/// serialized writers.
class MemoEmbedder final : public Embedder {
public:
  explicit MemoEmbedder(std::shared_ptr<Embedder> inner);

  std::string model_id() const override { return inner_->model_id(); }
  std::size_t dimension() const override { return inner_->dimension(); }
  std::size_t memo_size() const;

protected:
  std::vector<double> compute(std::string_view text) override;

private:
  std::shared_ptr<Embedder> inner_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> memo_;
};

}  // namespace hallucheck::embed

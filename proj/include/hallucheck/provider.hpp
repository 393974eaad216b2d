#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hallucheck::provider {

/// Sampling parameters sent with every completion.
struct GenerationParams {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 8096;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;

  /// Throws PreconditionError when a field is out of range.
  void validate() const;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

/// Knowledge-graph construction: deterministic decoding with repetition penalties.
GenerationParams kg_profile();
/// Self-detection and sampling: temperature 1, no penalties.
GenerationParams detect_profile();

enum class Role { system, user, assistant };
std::string_view role_name(Role r);

struct Message {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<Message> messages;
  GenerationParams params;

  /// Non-empty messages ending with a user turn, valid params.
  void validate() const;

  static ChatRequest user(std::string model_id, std::string content, GenerationParams params);
};

struct ChatResponse {
  std::string content;
  bool cached = false;
  std::map<std::string, std::string> provider_meta;
};

/// A chat-completion backend. Implementations must be safe to call concurrently.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Raw single attempt. Throws TransportError for retryable failures,
  /// ConfigError for bad credentials or unknown models, ProviderRefusal otherwise.
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Canonical form hashed by cache_key: backend, model, params and messages with
/// sorted keys, plus the sampling nonce when present.
nlohmann::json canonical_request(std::string_view backend, const ChatRequest& request,
                                 std::optional<std::string_view> nonce = std::nullopt);

/// SHA-256 over the canonical request.
std::string cache_key(std::string_view backend, const ChatRequest& request,
                      std::optional<std::string_view> nonce = std::nullopt);

/// On-disk response store: one `<digest>.json` file per request holding the
/// canonical request, the response content and a timestamp, plus a MANIFEST
/// listing digests in insertion order. Concurrent readers, serialized writers.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& digest) const;
  void put(const std::string& digest, const nlohmann::json& canonical, const std::string& content);
  std::vector<std::string> manifest() const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

/// Spaces request start times at least 60/rpm seconds apart. Shared per backend
/// name across the process; rpm = 0 disables limiting.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();

  static std::shared_ptr<RateLimiter> for_backend(const std::string& backend, double requests_per_minute);

private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

struct ClientOptions {
  RetryPolicy retry;
  double requests_per_minute = 0.0;
  std::optional<std::filesystem::path> cache_dir;
};

/// Front door for all LLM traffic: caching, bounded retries, rate limiting.
class LlmClient {
public:
  LlmClient(std::unique_ptr<Backend> backend, ClientOptions options = {});

  /// Cached single completion. Throws TransportError once the retry budget is
  /// spent, ProviderRefusal on empty content, PreconditionError on bad requests.
  ChatResponse complete(const ChatRequest& request);

  /// n independent completions. Each request carries a per-call nonce so the
  /// cache is never read, but every response is still written. Fails the whole
  /// call with SamplingError reporting how many succeeded.
  std::vector<ChatResponse> sample_n(const ChatRequest& request, std::size_t n);

  std::string cache_key(const ChatRequest& request) const;

  std::string backend_name() const { return backend_name_; }
  const ResponseCache* cache() const noexcept { return cache_.get(); }

  /// Completions actually sent to the backend (cache hits excluded).
  std::size_t backend_calls() const noexcept;

private:
  ChatResponse send_with_retry(const ChatRequest& request);

  std::unique_ptr<Backend> backend_;
  std::string backend_name_;
  ClientOptions options_;
  std::unique_ptr<ResponseCache> cache_;
  std::shared_ptr<RateLimiter> limiter_;
  mutable std::mutex stats_mutex_;
  std::size_t backend_calls_ = 0;
  std::size_t sample_calls_ = 0;
};

}  // namespace hallucheck::provider

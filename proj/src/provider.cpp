#include "hallucheck/provider.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "hallucheck/core.hpp"
#include "hallucheck/digest.hpp"
#include "hallucheck/errors.hpp"

namespace hallucheck::provider {

namespace fs = std::filesystem;

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw PreconditionError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("top_p must be in (0, 1]");
  if (max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
  if (!std::isfinite(frequency_penalty) || !std::isfinite(presence_penalty)) {
    throw PreconditionError("penalties must be finite");
  }
}

GenerationParams kg_profile() { return {0.0, 1.0, 8096, 1.0, 1.0}; }

GenerationParams detect_profile() { return {1.0, 1.0, 8096, 0.0, 0.0}; }

std::string_view role_name(Role r) {
  switch (r) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw PreconditionError("chat request has no messages");
  if (messages.back().role != Role::user) {
    throw PreconditionError("last message of a chat request must come from the user");
  }
  if (model_id.empty()) throw PreconditionError("chat request has no model_id");
  params.validate();
}

ChatRequest ChatRequest::user(std::string model_id, std::string content, GenerationParams params) {
  return {std::move(model_id), {Message{Role::user, std::move(content)}}, params};
}

nlohmann::json canonical_request(std::string_view backend, const ChatRequest& request,
                                  std::optional<std::string_view> nonce) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : request.messages) {
    msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  nlohmann::json j = {
      {"backend", backend},
      {"model_id", request.model_id},
      {"params",
       {{"temperature", request.params.temperature},
        {"top_p", request.params.top_p},
        {"max_tokens", request.params.max_tokens},
        {"frequency_penalty", request.params.frequency_penalty},
        {"presence_penalty", request.params.presence_penalty}}},
      {"messages", std::move(msgs)},
  };
  if (nonce) j["nonce"] = *nonce;
  return j;
}

std::string cache_key(std::string_view backend, const ChatRequest& request,
                      std::optional<std::string_view> nonce) {
  return sha256_hex(canonical_request(backend, request, nonce).dump());
}

// ---------------------------------------------------------------------------
// ResponseCache

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& digest) const {
  std::shared_lock lock(mutex_);
  std::ifstream in(dir_ / (digest + ".json"));
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("response").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    spdlog::warn("ignoring corrupt cache entry {}: {}", digest, e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& digest, const nlohmann::json& canonical,
                        const std::string& content) {
  const nlohmann::json record = {
      {"digest", digest}, {"request", canonical}, {"response", content}, {"timestamp", utc_timestamp()}};
  std::unique_lock lock(mutex_);
  const fs::path final_path = dir_ / (digest + ".json");
  const bool existed = fs::exists(final_path);
  const fs::path tmp = dir_ / (digest + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << record.dump(2) << '\n';
    if (!out) throw IoError("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, final_path);
  if (!existed) {
    std::ofstream manifest(dir_ / "MANIFEST", std::ios::app);
    manifest << digest << '\n';
    if (!manifest) throw IoError("cannot append to cache MANIFEST in " + dir_.string());
  }
}

std::vector<std::string> ResponseCache::manifest() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  std::ifstream in(dir_ / "MANIFEST");
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// RateLimiter

RateLimiter::RateLimiter(double requests_per_minute) {
  if (requests_per_minute > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(60.0 / requests_per_minute));
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    slot = std::max(std::chrono::steady_clock::now(), next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::shared_ptr<RateLimiter> RateLimiter::for_backend(const std::string& backend,
                                                      double requests_per_minute) {
  static std::mutex registry_mutex;
  static std::unordered_map<std::string, std::shared_ptr<RateLimiter>> registry;
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[backend + "@" + std::to_string(requests_per_minute)];
  if (!slot) slot = std::make_shared<RateLimiter>(requests_per_minute);
  return slot;
}

// ---------------------------------------------------------------------------
// LlmClient

LlmClient::LlmClient(std::unique_ptr<Backend> backend, ClientOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw ConfigError("LlmClient needs a backend");
  backend_name_ = backend_->name();
  if (options_.retry.max_attempts < 1) throw ConfigError("retry budget must allow one attempt");
  if (options_.cache_dir) cache_ = std::make_unique<ResponseCache>(*options_.cache_dir);
  limiter_ = RateLimiter::for_backend(backend_name_, options_.requests_per_minute);
}

std::string LlmClient::cache_key(const ChatRequest& request) const {
  return provider::cache_key(backend_name_, request);
}

std::size_t LlmClient::backend_calls() const noexcept {
  std::lock_guard lock(stats_mutex_);
  return backend_calls_;
}

ChatResponse LlmClient::send_with_retry(const ChatRequest& request) {
  auto backoff = options_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    limiter_->acquire();
    {
      std::lock_guard lock(stats_mutex_);
      ++backend_calls_;
    }
    try {
      ChatResponse r = backend_->send(request);
      if (trim(r.content).empty()) throw ProviderRefusal(backend_name_ + " returned no content");
      r.cached = false;
      return r;
    } catch (const TransportError& e) {
      if (attempt >= options_.retry.max_attempts) {
        throw TransportError(backend_name_ + ": giving up after " + std::to_string(attempt) +
                             " attempts: " + e.what());
      }
      spdlog::warn("{}: attempt {} failed ({}), retrying in {} ms", backend_name_, attempt, e.what(),
                   backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
    }
  }
}

ChatResponse LlmClient::complete(const ChatRequest& request) {
  request.validate();
  const auto canonical = canonical_request(backend_name_, request);
  const std::string digest = sha256_hex(canonical.dump());
  if (cache_) {
    if (auto hit = cache_->get(digest)) {
      ChatResponse r;
      r.content = std::move(*hit);
      r.cached = true;
      return r;
    }
  }
  ChatResponse r = send_with_retry(request);
  if (cache_) cache_->put(digest, canonical, r.content);
  return r;
}

std::vector<ChatResponse> LlmClient::sample_n(const ChatRequest& request, std::size_t n) {
  if (n == 0) throw PreconditionError("sample_n needs n >= 1");
  request.validate();
  if (request.params.temperature <= 0.0) {
    spdlog::warn("sampling {} completions at temperature 0 will give near-identical samples", n);
  }
  std::size_t call_id;
  {
    std::lock_guard lock(stats_mutex_);
    call_id = sample_calls_++;
  }
  std::vector<ChatResponse> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string nonce = "sample:" + std::to_string(call_id) + ":" + std::to_string(i);
    try {
      ChatResponse r = send_with_retry(request);
      if (cache_) {
        const auto canonical = canonical_request(backend_name_, request, nonce);
        cache_->put(sha256_hex(canonical.dump()), canonical, r.content);
      }
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw SamplingError("sample " + std::to_string(i + 1) + " of " + std::to_string(n) +
                              " failed after " + std::to_string(out.size()) + " succeeded: " + e.what(),
                          out.size());
    }
  }
  return out;
}

}  // namespace hallucheck::provider

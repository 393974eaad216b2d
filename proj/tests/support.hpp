#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucheck/core.hpp"
#include "hallucheck/mock_backend.hpp"
#include "hallucheck/provider.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("hallucheck-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Client over a MockBackend; the raw backend pointer stays valid for the
/// client's lifetime.
struct MockClient {
  hallucheck::provider::MockBackend* backend = nullptr;
  std::unique_ptr<hallucheck::provider::LlmClient> client;

  explicit MockClient(hallucheck::provider::MockScript script, hallucheck::provider::ClientOptions opts = {}) {
    auto b = std::make_unique<hallucheck::provider::MockBackend>(std::move(script));
    backend = b.get();
    client = std::make_unique<hallucheck::provider::LlmClient>(std::move(b), std::move(opts));
  }
  hallucheck::provider::LlmClient& operator*() { return *client; }
  hallucheck::provider::LlmClient* operator->() { return client.get(); }
};

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len = 1, std::size_t max_len = 8) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
  return s;
}

inline std::string random_phrase(std::mt19937_64& rng, std::size_t max_words = 4) {
  std::uniform_int_distribution<std::size_t> words(1, max_words);
  std::string s;
  const auto n = words(rng);
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + random_word(rng);
  return s;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(dim);
  for (;;) {
    for (auto& x : v) x = u(rng);
    for (double x : v) {
      if (x != 0.0) return v;
    }
  }
}

}  // namespace testing_support

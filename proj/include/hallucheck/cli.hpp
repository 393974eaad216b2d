#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucheck/detect.hpp"
#include "hallucheck/eval.hpp"

namespace hallucheck::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kProvider = 3, kSchema = 4 };

struct ProviderSection {
  std::string backend = "mock";  // mock | openai | gemini
  std::string model_id = "gpt-4o";
  std::filesystem::path mock_script;
  std::string base_url;
  double requests_per_minute = 0.0;
  int timeout_seconds = 120;
  int max_attempts = 3;
  int initial_backoff_ms = 1000;
};

struct EmbeddingSection {
  std::string backend = "mock";  // mock | http
  std::string model_id = "mock-embed";
  std::size_t dimension = 384;
  std::uint64_t seed = 0;
  std::filesystem::path mock_spec;
  std::string base_url;
};

struct DatasetSection {
  std::filesystem::path path;
  std::string kind = "wikibio";  // wikibio | simpleqa
  std::size_t expected_samples = 20;
};

/// Parsed run configuration. Relative paths are resolved against the config
/// file's directory; `digest` is the SHA-256 of the canonical config JSON.
struct RunConfig {
  ProviderSection provider;
  EmbeddingSection embedding;
  std::vector<detect::DetectorConfig> detectors;
  DatasetSection dataset;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::filesystem::path samples_dir;
  std::optional<std::filesystem::path> prompts_dir;
  std::uint64_t seed = 42;
  std::size_t parallelism = 1;
  std::size_t bootstrap_resamples = 1000;
  eval::Label positive = eval::Label::hallucinated;
  bool deterministic = false;  // zero timings so reruns are byte-identical

  std::string digest;
  nlohmann::json raw;

  /// Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Stamp carried by every artifact.
  nlohmann::json provenance(const std::string& prompt_version) const;
};

/// Runs the command line in-process. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace hallucheck::cli

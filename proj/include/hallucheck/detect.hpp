#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hallucheck/core.hpp"
#include "hallucheck/embed.hpp"
#include "hallucheck/kgx.hpp"
#include "hallucheck/prompts.hpp"
#include "hallucheck/provider.hpp"

namespace hallucheck::detect {

enum class ScoreParsePolicy { first_float_clamped };

struct DetectorConfig {
  Method method = Method::self_confidence;
  bool use_kg = false;
  std::size_t n_samples = 20;  // selfcheck only
  std::string prompt_version;  // empty: take the prompt set's version
  ScoreParsePolicy score_parse_policy = ScoreParsePolicy::first_float_clamped;

  void validate() const;
  std::string label() const { return method_label(method, use_kg); }
};

/// One verification round: question, the model's own answer, and the
/// consistency it assigns between the statement and that answer.
struct QAStep {
  std::string question;
  std::string answer;
  double consistency = 0.0;
};

/// First decimal number in `reply` (optional leading minus, no exponent),
/// clamped to [0,1]. Throws ScoreParseError when there is none.
double parse_score(std::string_view reply, ScoreParsePolicy policy = ScoreParsePolicy::first_float_clamped);

/// Extraction results keyed by text, so each sample graph is built once and
/// reused across every output triple.
class KgMemo {
public:
  kgx::Extraction get_or_extract(std::string_view text, provider::LlmClient& llm, const kgx::ExtractOptions& opts);
  std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::map<std::string, kgx::Extraction, std::less<>> memo_;
};

/// Everything a detector may call out to. `llm` is needed by every method
/// except plain selfcheck; `embedder` by the selfcheck pair.
struct DetectorResources {
  provider::LlmClient* llm = nullptr;
  std::string model_id;
  embed::Embedder* embedder = nullptr;
  const PromptSet* prompts = &default_prompts();
  std::size_t parallelism = 1;
  KgMemo* sample_kgs = nullptr;  // optional; a per-call memo is used otherwise
};

/// question -> answer -> consistency for one statement, under the detection profile.
QAStep verify_statement(std::string_view statement, const DetectorResources& res);

/// Verbatim confidence for one statement, under the detection profile.
double elicit_confidence(std::string_view statement, const DetectorResources& res);

ScoreRecord self_questioning(const GeneratedOutput& o, const DetectorResources& res);
ScoreRecord self_questioning_kg(const GeneratedOutput& o, const DetectorResources& res);
ScoreRecord self_confidence(const GeneratedOutput& o, const DetectorResources& res);
ScoreRecord self_confidence_kg(const GeneratedOutput& o, const DetectorResources& res);

/// Mean clamped cosine similarity between the output and each sample.
ScoreRecord selfcheck(const GeneratedOutput& o, std::span<const std::string> samples, const DetectorResources& res);

/// For each output triple, the mean over samples of its best clamped cosine
/// match in that sample's graph; then the mean over triples.
ScoreRecord selfcheck_kg(const GeneratedOutput& o, std::span<const std::string> samples,
                         const DetectorResources& res);

/// Dispatches on config and stamps provenance and timing. Errors keep their
/// family but gain the detector label in their message.
ScoreRecord run_detector(const DetectorConfig& config, const GeneratedOutput& o, const DetectorResources& res,
                         std::span<const std::string> samples = {});

}  // namespace hallucheck::detect

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hallucheck/embed.hpp"
#include "hallucheck/eval.hpp"
#include "hallucheck/prompts.hpp"
#include "hallucheck/provider.hpp"

namespace hallucheck::data {

// ---------------------------------------------------------------------------
// WikiBio GPT-4o

/// One annotated sentence. `samples` are the stochastic regenerations of the
/// sentence's paragraph (the same list for every sentence of a paragraph).
struct WikiBioRecord {
  std::string paragraph_id;
  std::string concept_name;
  int sentence_index = 0;
  std::string sentence;
  eval::Label label = eval::Label::accurate;
  std::vector<std::string> samples;

  std::string example_ref() const { return paragraph_id + "#" + std::to_string(sentence_index); }
  friend bool operator==(const WikiBioRecord&, const WikiBioRecord&) = default;
};

struct WikiBioOptions {
  /// Required samples per record when the record carries any; 0 disables the check.
  std::size_t expected_samples = 20;
};

/// Reads the JSON-lines dataset (a single top-level JSON array is accepted
/// too). Throws IoError, or SchemaError naming the line and field.
std::vector<WikiBioRecord> load_wikibio(const std::filesystem::path& path, const WikiBioOptions& options = {});

nlohmann::json to_json(const WikiBioRecord& r);
void write_wikibio(const std::filesystem::path& path, const std::vector<WikiBioRecord>& records);

// ---------------------------------------------------------------------------
// SimpleQA

struct SimpleQARecord {
  std::string metadata;
  std::string question;
  std::string gold_answer;
  std::optional<std::string> model_answer;
  std::optional<eval::Label> label;  // absent until graded, or when NOT_ATTEMPTED
  std::string verdict;               // raw judge reply, kept for audit

  friend bool operator==(const SimpleQARecord&, const SimpleQARecord&) = default;
};

struct SimpleQAOptions {
  std::size_t min_records = 0;  // 4000 for the published benchmark
};

/// Reads the benchmark CSV (`metadata,problem,answer`, plus the optional
/// `model_answer,label,verdict` columns this tool adds when writing).
std::vector<SimpleQARecord> load_simpleqa(const std::filesystem::path& path, const SimpleQAOptions& options = {});
void write_simpleqa(const std::filesystem::path& path, const std::vector<SimpleQARecord>& records);

/// RFC 4180 CSV: quoted fields may hold commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

enum class Verdict { correct, incorrect, not_attempted };

/// First CORRECT / INCORRECT / NOT_ATTEMPTED token. Throws JudgeParseError.
Verdict parse_verdict(std::string_view reply);

/// One judge completion comparing model_answer with gold_answer. CORRECT maps to
/// accurate, INCORRECT to hallucinated, NOT_ATTEMPTED leaves the label empty.
SimpleQARecord grade_simpleqa(const SimpleQARecord& record, provider::LlmClient& llm, const std::string& model_id,
                              const PromptSet& prompts = default_prompts());

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  std::size_t sentence_count = 0;
  std::size_t paragraph_count = 0;
  std::size_t hallucinated_count = 0;
  std::size_t accurate_count = 0;
  double sentences_per_paragraph = 0.0;
  double samples_per_paragraph = 0.0;
  double avg_sample_length_words = 0.0;
  double avg_hallucinated_length_words = 0.0;
  double avg_accurate_length_words = 0.0;
  double semantic_similarity_h_vs_a = 0.0;
  std::string similarity_method = "centroid_cosine";
};

/// Counts and whitespace-token lengths; H-vs-A similarity is the cosine between
/// the centroid embeddings of the two classes. Paragraph samples are taken from
/// each paragraph's first record that carries any. Throws DegenerateLabels when
/// a class is empty.
DatasetStats compute_stats(const std::vector<WikiBioRecord>& records, embed::Embedder& embedder);

nlohmann::json to_json(const DatasetStats& s);

// ---------------------------------------------------------------------------
// Sample store

struct StoredSamples {
  std::filesystem::path path;
  std::string digest;
  bool duplicate = false;  // identical batch already stored; nothing written
};

/// Directory of `<paragraph>.json` files, each holding the sample batches
/// written for that paragraph with their content digests.
class SampleStore {
public:
  explicit SampleStore(std::filesystem::path dir);

  /// Appends a batch unless an identical one is stored. Throws
  /// PreconditionError on an empty batch, IoError on write failure.
  StoredSamples persist(const std::string& paragraph_id, const std::vector<std::string>& samples);

  /// All stored samples for the paragraph in write order. Throws NotFound.
  std::vector<std::string> read(const std::string& paragraph_id) const;

  bool contains(const std::string& paragraph_id) const;
  std::size_t count(const std::string& paragraph_id) const;
  std::filesystem::path path_for(const std::string& paragraph_id) const;

  /// Stamped into every file written from now on.
  void set_provenance(nlohmann::json provenance);

private:
  std::filesystem::path dir_;
  nlohmann::json provenance_;
  mutable std::mutex mutex_;
};

}  // namespace hallucheck::data

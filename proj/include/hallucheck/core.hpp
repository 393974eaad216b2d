#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hallucheck {

/// Trims, collapses internal whitespace runs to one space and lower-cases
/// (Unicode simple case mapping). Used for equality, never for display.
std::string normalize_text(std::string_view raw);

/// Trims leading/trailing whitespace only.
std::string trim(std::string_view raw);

/// Whitespace-token count, the word-length rule used for dataset statistics.
std::size_t word_count(std::string_view text);

/// One atomic (subject, relation, object) fact. Fields are stored trimmed and
/// compare under normalize_text.
class Triple {
public:
  /// Throws PreconditionError if any field is blank after trimming.
  Triple(std::string_view subject, std::string_view relation, std::string_view object);

  const std::string& subject() const noexcept { return subject_; }
  const std::string& relation() const noexcept { return relation_; }
  const std::string& object() const noexcept { return object_; }

  /// Normalized identity used for equality and hashing.
  const std::string& key() const noexcept { return key_; }

  friend bool operator==(const Triple& a, const Triple& b) noexcept { return a.key_ == b.key_; }

private:
  std::string subject_;
  std::string relation_;
  std::string object_;
  std::string key_;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept;
};

/// The set of triples extracted from one text. Duplicates are removed on
/// construction keeping first-occurrence order. An empty extraction becomes
/// the degenerate graph {("statement", "states", source_text)}.
class KnowledgeGraph {
public:
  static constexpr std::string_view kPseudoSubject = "statement";
  static constexpr std::string_view kPseudoRelation = "states";

  KnowledgeGraph(std::string source_text, std::vector<Triple> triples);

  const std::vector<Triple>& triples() const noexcept { return triples_; }
  const std::string& source_text() const noexcept { return source_text_; }
  bool degenerate() const noexcept { return degenerate_; }
  std::size_t size() const noexcept { return triples_.size(); }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

private:
  std::string source_text_;
  std::vector<Triple> triples_;
  bool degenerate_ = false;
};

/// One sentence under evaluation, optionally inside its paragraph.
struct GeneratedOutput {
  std::string prompt_id;
  int sentence_index = 0;
  std::string text;
  std::optional<std::string> context;
};

/// Advisory check: a single run of terminal punctuation at the end and none
/// inside. Multi-sentence inputs are still scored as one unit.
bool looks_like_single_sentence(std::string_view text);

enum class Method { self_questioning, self_confidence, selfcheck };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

/// "self_confidence" or "self_confidence+kg".
std::string method_label(Method m, bool use_kg);

struct OutputRef {
  std::string prompt_id;
  int sentence_index = 0;

  /// "<prompt_id>#<sentence_index>", the example_ref used to join with labels.
  std::string str() const;
  friend bool operator==(const OutputRef&, const OutputRef&) = default;
};

struct TripleScore {
  Triple triple;
  double score;
};

struct ScoreRecord {
  OutputRef output_ref;
  Method method = Method::self_confidence;
  bool kg_used = false;
  double score = 0.0;
  std::optional<std::vector<TripleScore>> triple_scores;

  // Provenance and telemetry.
  int missed_triples = 0;
  int parse_losses = 0;
  bool degenerate_kg = false;
  std::string prompt_version;
  std::string model_id;
  std::string embed_model_id;
  double elapsed_ms = 0.0;
  std::string config_digest;
  std::uint64_t seed = 0;

  std::string label() const { return method_label(method, kg_used); }
};

/// Arithmetic mean of the per-triple scores; the aggregate of every +KG detector.
double mean_of(const std::vector<TripleScore>& scores);

/// Clamps to [0,1]; NaN maps to 0.
double clamp_unit(double x) noexcept;

}  // namespace hallucheck

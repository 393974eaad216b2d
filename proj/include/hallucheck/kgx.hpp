#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hallucheck/core.hpp"
#include "hallucheck/prompts.hpp"
#include "hallucheck/provider.hpp"

namespace hallucheck::kgx {

/// The single extraction prompt: a template with `{{PASSAGE}}`, an optional
/// `{{#CONTEXT}}` block and a `{{FORMAT}}` slot for the reply-format rules.
struct ExtractionPromptTemplate {
  std::string template_text;
  std::string output_format_instructions;
  std::string version;

  static ExtractionPromptTemplate from(const PromptSet& prompts);
  std::string render(std::string_view passage, std::optional<std::string_view> context = std::nullopt) const;
};

struct ParsedTriples {
  std::vector<Triple> triples;
  int losses = 0;  // elements or lines that did not yield a valid triple
};

/// Total parser for extraction replies. Primary grammar: a JSON array of
/// three-element arrays (markdown fences and surrounding prose tolerated).
/// Fallback: one `subject | relation | object` per line. Never throws.
ParsedTriples parse_triples_detailed(std::string_view reply);
std::vector<Triple> parse_triples(std::string_view reply);

/// Primary-grammar serialization, e.g. `[["a","r","b"]]`.
std::string serialize_triples(const std::vector<Triple>& triples);

/// Rebuilds a graph from its serialization. A lone pseudo-triple whose object
/// is the source text restores the degenerate flag.
KnowledgeGraph deserialize_kg(std::string source_text, std::string_view serialized);

struct ExtractOptions {
  std::string model_id;
  ExtractionPromptTemplate prompt;
};

struct Extraction {
  KnowledgeGraph kg;
  int parse_losses = 0;
};

/// One completion under the KG profile, parsed, deduplicated, and wrapped as a
/// degenerate graph when nothing parses. Throws PreconditionError on blank
/// text; provider errors propagate.
Extraction extract_kg(std::string_view text, provider::LlmClient& llm, const ExtractOptions& options,
                      std::optional<std::string_view> context = std::nullopt);

/// Line record written by `hallucheck extract`.
nlohmann::json kg_record(const Extraction& e);

}  // namespace hallucheck::kgx

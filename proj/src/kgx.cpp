#include "hallucheck/kgx.hpp"

#include <spdlog/spdlog.h>

#include <sstream>

#include "hallucheck/errors.hpp"

namespace hallucheck::kgx {

ExtractionPromptTemplate ExtractionPromptTemplate::from(const PromptSet& prompts) {
  return {prompts.extract_triples, prompts.extract_format, prompts.version};
}

std::string ExtractionPromptTemplate::render(std::string_view passage,
                                             std::optional<std::string_view> context) const {
  return render_template(template_text, {{"PASSAGE", std::string(passage)},
                                         {"CONTEXT", context ? std::string(*context) : std::string()},
                                         {"FORMAT", output_format_instructions}});
}

namespace {

std::optional<std::string> element_text(const nlohmann::json& e) {
  if (e.is_string()) return e.get<std::string>();
  if (e.is_number() || e.is_boolean()) return e.dump();
  return std::nullopt;
}

// Returns nullopt when the reply does not hold a JSON array at all.
std::optional<ParsedTriples> parse_json_grammar(std::string_view reply) {
  const auto b = reply.find('[');
  const auto e = reply.rfind(']');
  if (b == std::string_view::npos || e == std::string_view::npos || e < b) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply.substr(b, e - b + 1));
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
  if (!j.is_array()) return std::nullopt;
  ParsedTriples out;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 3) {
      ++out.losses;
      continue;
    }
    auto s = element_text(item[0]), r = element_text(item[1]), o = element_text(item[2]);
    if (!s || !r || !o || trim(*s).empty() || trim(*r).empty() || trim(*o).empty()) {
      ++out.losses;
      continue;
    }
    out.triples.emplace_back(*s, *r, *o);
  }
  return out;
}

ParsedTriples parse_line_grammar(std::string_view reply) {
  ParsedTriples out;
  std::istringstream in{std::string(reply)};
  for (std::string line; std::getline(in, line);) {
    std::string t = trim(line);
    if (t.empty() || t.rfind("```", 0) == 0) continue;
    if (t.front() == '-' || t.front() == '*') t = trim(std::string_view(t).substr(1));
    const auto p1 = t.find('|');
    const auto p2 = p1 == std::string::npos ? std::string::npos : t.find('|', p1 + 1);
    if (p2 == std::string::npos || t.find('|', p2 + 1) != std::string::npos) {
      ++out.losses;
      continue;
    }
    const auto s = trim(std::string_view(t).substr(0, p1));
    const auto r = trim(std::string_view(t).substr(p1 + 1, p2 - p1 - 1));
    const auto o = trim(std::string_view(t).substr(p2 + 1));
    if (s.empty() || r.empty() || o.empty()) {
      ++out.losses;
      continue;
    }
    out.triples.emplace_back(s, r, o);
  }
  return out;
}

}  // namespace

ParsedTriples parse_triples_detailed(std::string_view reply) {
  if (auto j = parse_json_grammar(reply)) return std::move(*j);
  return parse_line_grammar(reply);
}

std::vector<Triple> parse_triples(std::string_view reply) { return parse_triples_detailed(reply).triples; }

std::string serialize_triples(const std::vector<Triple>& triples) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : triples) j.push_back({t.subject(), t.relation(), t.object()});
  return j.dump();
}

KnowledgeGraph deserialize_kg(std::string source_text, std::string_view serialized) {
  auto triples = parse_triples(serialized);
  if (triples.size() == 1 && triples[0].subject() == KnowledgeGraph::kPseudoSubject &&
      triples[0].relation() == KnowledgeGraph::kPseudoRelation && triples[0].object() == trim(source_text)) {
    triples.clear();
  }
  return KnowledgeGraph(std::move(source_text), std::move(triples));
}

Extraction extract_kg(std::string_view text, provider::LlmClient& llm, const ExtractOptions& options,
                      std::optional<std::string_view> context) {
  if (trim(text).empty()) throw PreconditionError("extract_kg needs non-empty text");
  const auto request =
      provider::ChatRequest::user(options.model_id, options.prompt.render(text, context), provider::kg_profile());
  const auto reply = llm.complete(request);
  auto parsed = parse_triples_detailed(reply.content);
  if (parsed.losses > 0 && !parsed.triples.empty()) {
    spdlog::warn("extraction: {} unparseable element(s) dropped, {} triple(s) kept", parsed.losses,
                 parsed.triples.size());
  }
  return Extraction{KnowledgeGraph(std::string(text), std::move(parsed.triples)), parsed.losses};
}

nlohmann::json kg_record(const Extraction& e) {
  return {
      {"source_text", e.kg.source_text()},
      {"degenerate", e.kg.degenerate()},
      {"triples", nlohmann::json::parse(serialize_triples(e.kg.triples()))},
      {"parse_losses", e.parse_losses},
  };
}

}  // namespace hallucheck::kgx

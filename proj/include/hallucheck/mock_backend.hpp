#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucheck/provider.hpp"

namespace hallucheck::provider {

/// How a mock rule builds its reply.
enum class MockGenerator {
  literal,        // the rule's reply (or next entry of its reply sequence)
  hash_score,     // a number in [0,1] derived from a digest of the request
  naive_triples,  // one triple built from the text between the rule's delimiters
};

struct MockRule {
  std::vector<std::string> match;     // every substring must occur in the request
  std::vector<std::string> replies;   // literal replies, cycled per match
  MockGenerator generator = MockGenerator::literal;
  std::string open_delim = "<passage>";
  std::string close_delim = "</passage>";
};

enum class MockFailure { transport, refusal };

/// Ordered rules, first match wins, otherwise the default reply.
///
/// File format (JSON):
///   {"rules": [{"match": "CONFIDENCE", "reply": "0.85"},
///              {"match": ["EXTRACT_TRIPLES", "Turing"], "replies": ["[...]", "[...]"]},
///              {"match": "EXTRACT_TRIPLES", "generator": "naive_triples"}],
///    "default": "ok", "default_generator": "hash_score",
///    "fail_on_calls": [2], "fail_kind": "refusal", "models": ["gpt-4o"]}
struct MockScript {
  std::vector<MockRule> rules;
  std::string default_reply;
  MockGenerator default_generator = MockGenerator::literal;
  std::set<std::size_t> fail_on_calls;  // 1-based global call numbers
  MockFailure fail_kind = MockFailure::transport;
  std::vector<std::string> models;      // empty accepts any model_id

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);

  MockScript& on(std::string match, std::string reply);
  MockScript& on(std::vector<std::string> match, std::string reply);
};

/// Deterministic offline backend driven by a MockScript.
class MockBackend final : public Backend {
public:
  explicit MockBackend(MockScript script);

  std::string name() const override { return "mock"; }
  ChatResponse send(const ChatRequest& request) override;

  std::size_t calls() const;
  /// Every request received, in arrival order.
  std::vector<ChatRequest> history() const;

private:
  std::string generate(const MockRule* rule, const std::string& haystack, std::size_t rule_hits) const;

  MockScript script_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<std::size_t> rule_hits_;
  std::vector<ChatRequest> history_;
};

/// Reply text for a rule/default generator, exposed for tests.
std::string naive_triples_reply(std::string_view passage);
std::string hash_score_reply(std::string_view request_text);

}  // namespace hallucheck::provider

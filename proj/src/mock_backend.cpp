#include "hallucheck/mock_backend.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hallucheck/core.hpp"
#include "hallucheck/digest.hpp"
#include "hallucheck/errors.hpp"

namespace hallucheck::provider {

namespace {

MockGenerator parse_generator(const std::string& name) {
  if (name == "literal") return MockGenerator::literal;
  if (name == "hash_score") return MockGenerator::hash_score;
  if (name == "naive_triples") return MockGenerator::naive_triples;
  throw ConfigError("unknown mock generator '" + name + "'");
}

std::vector<std::string> string_or_list(const nlohmann::json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& words, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
  try {
    MockScript s;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      MockRule rule;
      rule.match = string_or_list(r.at("match"));
      if (r.contains("reply")) rule.replies.push_back(r.at("reply").get<std::string>());
      if (r.contains("replies")) {
        for (const auto& x : r.at("replies")) rule.replies.push_back(x.get<std::string>());
      }
      rule.generator = parse_generator(r.value("generator", std::string("literal")));
      if (rule.generator == MockGenerator::literal && rule.replies.empty()) {
        throw ConfigError("mock rule without reply");
      }
      rule.open_delim = r.value("open", rule.open_delim);
      rule.close_delim = r.value("close", rule.close_delim);
      s.rules.push_back(std::move(rule));
    }
    s.default_reply = j.value("default", std::string());
    s.default_generator = parse_generator(j.value("default_generator", std::string("literal")));
    for (const auto& c : j.value("fail_on_calls", nlohmann::json::array())) {
      s.fail_on_calls.insert(c.get<std::size_t>());
    }
    const std::string kind = j.value("fail_kind", std::string("transport"));
    if (kind == "transport") {
      s.fail_kind = MockFailure::transport;
    } else if (kind == "refusal") {
      s.fail_kind = MockFailure::refusal;
    } else {
      throw ConfigError("unknown mock fail_kind '" + kind + "'");
    }
    s.models = j.value("models", std::vector<std::string>{});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed mock script: ") + e.what());
  }
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("mock script " + path.string() + " is not valid JSON: " + e.what());
  }
}

MockScript& MockScript::on(std::string match, std::string reply) {
  return on(std::vector<std::string>{std::move(match)}, std::move(reply));
}

MockScript& MockScript::on(std::vector<std::string> match, std::string reply) {
  MockRule r;
  r.match = std::move(match);
  r.replies.push_back(std::move(reply));
  rules.push_back(std::move(r));
  return *this;
}

std::string naive_triples_reply(std::string_view passage) {
  std::string text = trim(passage);
  while (!text.empty() && (text.back() == '.' || text.back() == '!' || text.back() == '?')) text.pop_back();

  // Clauses split on commas and " and "; the first clause names the subject.
  std::vector<std::string> clauses;
  std::string cur;
  auto flush = [&] {
    if (!trim(cur).empty()) clauses.push_back(trim(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ',' || text[i] == ';') {
      flush();
    } else if (text.compare(i, 5, " and ") == 0) {
      flush();
      i += 4;
    } else {
      cur += text[i];
    }
  }
  flush();

  nlohmann::json out = nlohmann::json::array();
  std::string subject;
  for (const auto& clause : clauses) {
    const auto w = split_words(clause);
    if (subject.empty()) {
      if (w.size() < 3) break;
      const std::size_t subj_len = std::min<std::size_t>(2, w.size() - 2);
      subject = join(w, 0, subj_len);
      out.push_back({subject, w[subj_len], join(w, subj_len + 1, w.size())});
    } else if (w.size() >= 2) {
      out.push_back({subject, w[0], join(w, 1, w.size())});
    }
  }
  return out.dump();
}

std::string hash_score_reply(std::string_view request_text) {
  const std::string h = sha256_hex(request_text);
  const unsigned long v = std::stoul(h.substr(0, 8), nullptr, 16);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(v % 101) / 100.0);
  return buf;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)), rule_hits_(script_.rules.size(), 0) {}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::vector<ChatRequest> MockBackend::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::string MockBackend::generate(const MockRule* rule, const std::string& haystack,
                                  std::size_t rule_hits) const {
  const MockGenerator gen = rule ? rule->generator : script_.default_generator;
  switch (gen) {
    case MockGenerator::literal:
      if (!rule) return script_.default_reply;
      return rule->replies[rule_hits % rule->replies.size()];
    case MockGenerator::hash_score:
      return hash_score_reply(haystack);
    case MockGenerator::naive_triples: {
      const std::string open = rule ? rule->open_delim : "<passage>";
      const std::string close = rule ? rule->close_delim : "</passage>";
      const auto b = haystack.find(open);
      if (b == std::string::npos) return naive_triples_reply(haystack);
      const auto start = b + open.size();
      const auto e = haystack.find(close, start);
      return naive_triples_reply(haystack.substr(start, e == std::string::npos ? std::string::npos : e - start));
    }
  }
  return script_.default_reply;
}

ChatResponse MockBackend::send(const ChatRequest& request) {
  std::string haystack;
  for (const auto& m : request.messages) {
    if (!haystack.empty()) haystack += '\n';
    haystack += m.content;
  }
  const MockRule* rule = nullptr;
  std::size_t hits = 0;
  {
    std::lock_guard lock(mutex_);
    const std::size_t call = ++calls_;
    history_.push_back(request);
    if (script_.fail_on_calls.count(call)) {
      if (script_.fail_kind == MockFailure::refusal) {
        throw ProviderRefusal("mock refusal on call " + std::to_string(call));
      }
      throw TransportError("mock transport failure on call " + std::to_string(call));
    }
    if (!script_.models.empty() &&
        std::find(script_.models.begin(), script_.models.end(), request.model_id) == script_.models.end()) {
      throw ConfigError("mock backend does not serve model '" + request.model_id + "'");
    }
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
      const auto& r = script_.rules[i];
      const bool all = std::all_of(r.match.begin(), r.match.end(),
                                   [&](const std::string& m) { return haystack.find(m) != std::string::npos; });
      if (all) {
        rule = &r;
        hits = rule_hits_[i]++;
        break;
      }
    }
  }
  ChatResponse resp;
  resp.content = generate(rule, haystack, hits);
  resp.provider_meta["backend"] = "mock";
  return resp;
}

}  // namespace hallucheck::provider

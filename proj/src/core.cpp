#include "hallucheck/core.hpp"

#include <locale.h>
#include <wctype.h>

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>

#include "hallucheck/errors.hpp"

namespace hallucheck {

namespace {

locale_t utf8_locale() {
  static const locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
    if (l == static_cast<locale_t>(0)) l = newlocale(LC_CTYPE_MASK, "C", static_cast<locale_t>(0));
    return l;
  }();
  return loc;
}

// Decodes one code point; malformed bytes decode as themselves (Latin-1).
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    if (int c1 = cont(1); c1 >= 0) {
      i += 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  i += 1;
  return b0;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= '\t' && cp <= '\r');
  // glibc leaves the no-break spaces out of iswspace.
  if (cp == 0xA0 || cp == 0x2007 || cp == 0x202F) return true;
  return iswspace_l(static_cast<wint_t>(cp), utf8_locale()) != 0;
}

bool is_ascii_space(char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = next_code_point(raw, i);
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), utf8_locale())));
  }
  return out;
}

std::string trim(std::string_view raw) {
  auto b = std::find_if_not(raw.begin(), raw.end(), is_ascii_space);
  auto e = std::find_if_not(raw.rbegin(), raw.rend(), is_ascii_space).base();
  return b < e ? std::string(b, e) : std::string();
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

Triple::Triple(std::string_view subject, std::string_view relation, std::string_view object)
    : subject_(trim(subject)), relation_(trim(relation)), object_(trim(object)) {
  if (subject_.empty() || relation_.empty() || object_.empty()) {
    throw PreconditionError("triple fields must be non-empty");
  }
  // Length-prefixed so the concatenation is injective.
  for (const auto* f : {&subject_, &relation_, &object_}) {
    const std::string n = normalize_text(*f);
    key_ += std::to_string(n.size());
    key_ += ':';
    key_ += n;
  }
}

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
  return std::hash<std::string>{}(t.key());
}

KnowledgeGraph::KnowledgeGraph(std::string source_text, std::vector<Triple> triples)
    : source_text_(std::move(source_text)) {
  for (auto& t : triples) {
    if (std::find(triples_.begin(), triples_.end(), t) == triples_.end()) {
      triples_.push_back(std::move(t));
    }
  }
  if (triples_.empty()) {
    triples_.emplace_back(kPseudoSubject, kPseudoRelation, source_text_);
    degenerate_ = true;
  }
}

bool looks_like_single_sentence(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
  std::size_t end = t.size();
  while (end > 0 && (is_terminal(t[end - 1]) || t[end - 1] == '"' || t[end - 1] == ')')) --end;
  if (end == t.size()) return false;
  // A terminal mark followed by a space and an upper-case letter starts a new sentence.
  for (std::size_t i = 0; i + 2 < end; ++i) {
    if (is_terminal(t[i]) && t[i + 1] == ' ' && std::isupper(static_cast<unsigned char>(t[i + 2]))) {
      return false;
    }
  }
  return true;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::self_questioning:
      return "self_questioning";
    case Method::self_confidence:
      return "self_confidence";
    case Method::selfcheck:
      return "selfcheck";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "self_questioning") return Method::self_questioning;
  if (name == "self_confidence") return Method::self_confidence;
  if (name == "selfcheck") return Method::selfcheck;
  throw ConfigError("unknown detector method '" + std::string(name) + "'");
}

std::string method_label(Method m, bool use_kg) {
  std::string s(method_name(m));
  if (use_kg) s += "+kg";
  return s;
}

std::string OutputRef::str() const { return prompt_id + "#" + std::to_string(sentence_index); }

double mean_of(const std::vector<TripleScore>& scores) {
  if (scores.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : scores) sum += s.score;
  return sum / static_cast<double>(scores.size());
}

double clamp_unit(double x) noexcept {
  if (!(x > 0.0)) return 0.0;
  return x > 1.0 ? 1.0 : x;
}

}  // namespace hallucheck

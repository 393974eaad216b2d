#include "hallucheck/prompts.hpp"

#include <fstream>
#include <sstream>

#include "hallucheck/core.hpp"
#include "hallucheck/errors.hpp"
#include "hallucheck/prompt_resources.hpp"

namespace hallucheck {

const PromptSet& default_prompts() {
  static const PromptSet set = [] {
    namespace r = resources;
    return PromptSet{
        std::string(r::kPromptVersion),   std::string(r::k_extract_triples), std::string(r::k_extract_format),
        std::string(r::k_verify_question), std::string(r::k_verify_answer),  std::string(r::k_consistency),
        std::string(r::k_confidence),      std::string(r::k_sample_passage), std::string(r::k_grade_simpleqa),
    };
  }();
  return set;
}

PromptSet load_prompts(const std::filesystem::path& dir) {
  auto read = [&](const std::string& name, std::string& slot, bool required) {
    std::ifstream in(dir / name);
    if (!in) {
      if (required) throw ConfigError("prompt directory " + dir.string() + " has no " + name);
      return;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    slot = ss.str();
  };
  PromptSet p = default_prompts();
  read("VERSION", p.version, true);
  p.version = trim(p.version);
  read("extract_triples.txt", p.extract_triples, false);
  read("extract_format.txt", p.extract_format, false);
  read("verify_question.txt", p.verify_question, false);
  read("verify_answer.txt", p.verify_answer, false);
  read("consistency.txt", p.consistency, false);
  read("confidence.txt", p.confidence, false);
  read("sample_passage.txt", p.sample_passage, false);
  read("grade_simpleqa.txt", p.grade_simpleqa, false);
  return p;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const std::string_view tag = tmpl.substr(open + 2, close - open - 2);
    i = close + 2;
    if (!tag.empty() && tag.front() == '#') {
      const std::string name(tag.substr(1));
      const std::string end_tag = "{{/" + name + "}}";
      const auto end = tmpl.find(end_tag, i);
      const std::string_view body = tmpl.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i);
      const auto it = vars.find(name);
      if (it != vars.end() && !trim(it->second).empty()) {
        std::string_view inner = body;
        if (!inner.empty() && inner.front() == '\n') inner.remove_prefix(1);
        out += render_template(inner, vars);
      }
      i = end == std::string_view::npos ? tmpl.size() : end + end_tag.size();
      if (i < tmpl.size() && tmpl[i] == '\n') ++i;
    } else {
      const auto it = vars.find(std::string(tag));
      if (it != vars.end()) {
        out += it->second;
      } else {
        out.append(tmpl.substr(open, close + 2 - open));
      }
    }
  }
  return out;
}

}  // namespace hallucheck

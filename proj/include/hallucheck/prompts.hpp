#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace hallucheck {

/// Every prompt the pipeline sends, plus the version stamped into outputs.
struct PromptSet {
  std::string version;
  std::string extract_triples;
  std::string extract_format;
  std::string verify_question;
  std::string verify_answer;
  std::string consistency;
  std::string confidence;
  std::string sample_passage;
  std::string grade_simpleqa;
};

/// The prompt set compiled from resources/prompts.
const PromptSet& default_prompts();

/// Reads `<name>.txt` files and VERSION from `dir`; missing files keep the
/// compiled default. Throws ConfigError when VERSION is absent.
PromptSet load_prompts(const std::filesystem::path& dir);

/// Substitutes `{{NAME}}` placeholders. A `{{#NAME}}...{{/NAME}}` block is kept
/// only when NAME maps to non-empty text; its delimiters are removed.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace hallucheck

#include "hallucheck/data.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hallucheck/core.hpp"
#include "hallucheck/digest.hpp"
#include "hallucheck/errors.hpp"

namespace hallucheck::data {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

WikiBioRecord wikibio_from_json(const nlohmann::json& j, const WikiBioOptions& options) {
  std::string field;
  try {
    auto need = [&](const char* name) -> const nlohmann::json& {
      field = name;
      if (!j.contains(name)) throw SchemaError(std::string("missing field '") + name + "'");
      return j.at(name);
    };
    WikiBioRecord r;
    const auto& pid = need("paragraph_id");
    r.paragraph_id = pid.is_string() ? pid.get<std::string>() : pid.dump();
    r.concept_name = need("concept").get<std::string>();
    r.sentence_index = need("sentence_index").get<int>();
    if (r.sentence_index < 0) throw SchemaError("field 'sentence_index' is negative");
    r.sentence = need("sentence").get<std::string>();
    if (trim(r.sentence).empty()) throw SchemaError("field 'sentence' is empty");
    r.label = eval::parse_label(need("label").get<std::string>());
    field = "samples";
    if (j.contains("samples")) r.samples = j.at("samples").get<std::vector<std::string>>();
    if (!r.samples.empty() && options.expected_samples > 0 && r.samples.size() != options.expected_samples) {
      throw SchemaError("field 'samples' has " + std::to_string(r.samples.size()) + " entries, expected " +
                        std::to_string(options.expected_samples));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("field '" + field + "': " + e.what());
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    if (msg.find("field") != std::string::npos) throw;
    throw SchemaError("field '" + field + "': " + msg);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// WikiBio

std::vector<WikiBioRecord> load_wikibio(const fs::path& path, const WikiBioOptions& options) {
  const std::string text = read_file(path);
  const std::string body = trim(text);
  if (body.empty()) throw SchemaError(path.string() + ": empty dataset file");

  std::vector<std::pair<std::size_t, nlohmann::json>> rows;  // (line, object)
  if (body.front() == '[') {
    try {
      const auto arr = nlohmann::json::parse(body);
      for (std::size_t i = 0; i < arr.size(); ++i) rows.emplace_back(i + 1, arr[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
  } else {
    std::istringstream in(text);
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        rows.emplace_back(lineno, nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  std::vector<WikiBioRecord> out;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& [lineno, j] : rows) {
    const std::string locus = path.string() + ":" + std::to_string(lineno) + ": ";
    if (!j.is_object()) throw SchemaError(locus + "record is not an object");
    WikiBioRecord r;
    try {
      r = wikibio_from_json(j, options);
    } catch (const SchemaError& e) {
      throw SchemaError(locus + e.what());
    }
    if (!seen.emplace(r.paragraph_id, r.sentence_index).second) {
      throw SchemaError(locus + "duplicate sentence " + r.example_ref());
    }
    out.push_back(std::move(r));
  }
  if (out.empty()) throw SchemaError(path.string() + ": no records");
  return out;
}

nlohmann::json to_json(const WikiBioRecord& r) {
  return {{"paragraph_id", r.paragraph_id}, {"concept", r.concept_name},         {"sentence_index", r.sentence_index},
          {"sentence", r.sentence},         {"label", eval::label_name(r.label)}, {"samples", r.samples}};
}

void write_wikibio(const fs::path& path, const std::vector<WikiBioRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// CSV / SimpleQA

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw SchemaError("unterminated quoted CSV field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<SimpleQARecord> load_simpleqa(const fs::path& path, const SimpleQAOptions& options) {
  std::vector<std::vector<std::string>> rows;
  try {
    rows = parse_csv(read_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (rows.empty()) throw SchemaError(path.string() + ": empty file");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
  for (const char* required : {"problem", "answer"}) {
    if (!col.count(required)) throw SchemaError(path.string() + ": missing column '" + required + "'");
  }
  auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::optional<std::string> {
    auto it = col.find(name);
    if (it == col.end() || it->second >= row.size()) return std::nullopt;
    return row[it->second];
  };

  std::vector<SimpleQARecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string locus = path.string() + ": row " + std::to_string(r) + ": ";
    if (row.size() != rows[0].size()) {
      throw SchemaError(locus + "has " + std::to_string(row.size()) + " fields, header has " +
                        std::to_string(rows[0].size()));
    }
    SimpleQARecord rec;
    rec.metadata = cell(row, "metadata").value_or("");
    rec.question = *cell(row, "problem");
    rec.gold_answer = *cell(row, "answer");
    if (trim(rec.question).empty()) throw SchemaError(locus + "field 'problem' is empty");
    if (trim(rec.gold_answer).empty()) throw SchemaError(locus + "field 'answer' is empty");
    if (auto m = cell(row, "model_answer"); m && !m->empty()) rec.model_answer = *m;
    if (auto l = cell(row, "label"); l && !l->empty()) {
      if (!rec.model_answer) throw SchemaError(locus + "field 'label' set without 'model_answer'");
      try {
        rec.label = eval::parse_label(*l);
      } catch (const SchemaError& e) {
        throw SchemaError(locus + "field 'label': " + e.what());
      }
    }
    rec.verdict = cell(row, "verdict").value_or("");
    out.push_back(std::move(rec));
  }
  if (out.size() < options.min_records) {
    throw SchemaError(path.string() + ": " + std::to_string(out.size()) + " records, expected at least " +
                      std::to_string(options.min_records));
  }
  return out;
}

void write_simpleqa(const fs::path& path, const std::vector<SimpleQARecord>& records) {
  std::string out = "metadata,problem,answer,model_answer,label,verdict\n";
  for (const auto& r : records) {
    out += csv_escape(r.metadata) + "," + csv_escape(r.question) + "," + csv_escape(r.gold_answer) + "," +
           csv_escape(r.model_answer.value_or("")) + "," +
           (r.label ? std::string(eval::label_name(*r.label)) : std::string()) + "," + csv_escape(r.verdict) + "\n";
  }
  write_file_atomic(path, out);
}

Verdict parse_verdict(std::string_view reply) {
  std::string token;
  auto check = [&]() -> std::optional<Verdict> {
    if (token == "CORRECT") return Verdict::correct;
    if (token == "INCORRECT") return Verdict::incorrect;
    if (token == "NOT_ATTEMPTED") return Verdict::not_attempted;
    return std::nullopt;
  };
  for (char c : reply) {
    if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
      token += c;
    } else {
      if (auto v = check()) return *v;
      token.clear();
    }
  }
  if (auto v = check()) return *v;
  throw JudgeParseError("no CORRECT/INCORRECT/NOT_ATTEMPTED verdict in '" + std::string(reply.substr(0, 80)) + "'");
}

SimpleQARecord grade_simpleqa(const SimpleQARecord& record, provider::LlmClient& llm, const std::string& model_id,
                              const PromptSet& prompts) {
  if (!record.model_answer) throw PreconditionError("grade_simpleqa needs a model answer");
  const std::string prompt = render_template(prompts.grade_simpleqa, {{"QUESTION", record.question},
                                                                      {"GOLD", record.gold_answer},
                                                                      {"PREDICTED", *record.model_answer}});
  provider::GenerationParams judge{0.0, 1.0, 8096, 0.0, 0.0};
  const auto reply = llm.complete(provider::ChatRequest::user(model_id, prompt, judge));
  SimpleQARecord out = record;
  out.verdict = trim(reply.content);
  switch (parse_verdict(reply.content)) {
    case Verdict::correct:
      out.label = eval::Label::accurate;
      break;
    case Verdict::incorrect:
      out.label = eval::Label::hallucinated;
      break;
    case Verdict::not_attempted:
      out.label.reset();
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

DatasetStats compute_stats(const std::vector<WikiBioRecord>& records, embed::Embedder& embedder) {
  if (records.empty()) throw PreconditionError("compute_stats needs records");
  DatasetStats s;
  s.sentence_count = records.size();
  std::map<std::string, const std::vector<std::string>*> paragraph_samples;
  double hal_words = 0.0, acc_words = 0.0;
  std::vector<double> hal_centroid(embedder.dimension(), 0.0), acc_centroid(embedder.dimension(), 0.0);
  for (const auto& r : records) {
    auto [it, inserted] = paragraph_samples.try_emplace(r.paragraph_id, &r.samples);
    if (!inserted && it->second->empty() && !r.samples.empty()) it->second = &r.samples;
    const bool hal = r.label == eval::Label::hallucinated;
    (hal ? s.hallucinated_count : s.accurate_count)++;
    (hal ? hal_words : acc_words) += static_cast<double>(word_count(r.sentence));
    const auto v = embedder.embed(r.sentence);
    auto& c = hal ? hal_centroid : acc_centroid;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += v.values[i];
  }
  if (s.hallucinated_count == 0 || s.accurate_count == 0) {
    throw DegenerateLabels("compute_stats needs both hallucinated and accurate sentences");
  }
  s.paragraph_count = paragraph_samples.size();
  s.sentences_per_paragraph = static_cast<double>(s.sentence_count) / static_cast<double>(s.paragraph_count);
  s.avg_hallucinated_length_words = hal_words / static_cast<double>(s.hallucinated_count);
  s.avg_accurate_length_words = acc_words / static_cast<double>(s.accurate_count);

  std::size_t n_samples = 0;
  double sample_words = 0.0;
  for (const auto& [pid, samples] : paragraph_samples) {
    for (const auto& smp : *samples) {
      sample_words += static_cast<double>(word_count(smp));
      ++n_samples;
    }
  }
  s.samples_per_paragraph = static_cast<double>(n_samples) / static_cast<double>(s.paragraph_count);
  if (n_samples > 0) s.avg_sample_length_words = sample_words / static_cast<double>(n_samples);

  // Centroid direction is scale-free, so the sums need no division.
  s.semantic_similarity_h_vs_a = embed::cosine_sim(hal_centroid, acc_centroid);
  return s;
}

nlohmann::json to_json(const DatasetStats& s) {
  return {
      {"sentence_count", s.sentence_count},
      {"paragraph_count", s.paragraph_count},
      {"hallucinated_count", s.hallucinated_count},
      {"accurate_count", s.accurate_count},
      {"sentences_per_paragraph", s.sentences_per_paragraph},
      {"samples_per_paragraph", s.samples_per_paragraph},
      {"avg_sample_length_words", s.avg_sample_length_words},
      {"avg_hallucinated_length_words", s.avg_hallucinated_length_words},
      {"avg_accurate_length_words", s.avg_accurate_length_words},
      {"semantic_similarity_h_vs_a", s.semantic_similarity_h_vs_a},
      {"similarity_method", s.similarity_method},
  };
}

// ---------------------------------------------------------------------------
// SampleStore

SampleStore::SampleStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create sample directory " + dir_.string() + ": " + ec.message());
}

fs::path SampleStore::path_for(const std::string& paragraph_id) const {
  std::string safe;
  for (char c : paragraph_id) {
    safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  if (safe.size() > 64) safe.resize(64);
  return dir_ / (safe + "-" + sha256_hex(paragraph_id).substr(0, 8) + ".json");
}

StoredSamples SampleStore::persist(const std::string& paragraph_id, const std::vector<std::string>& samples) {
  if (samples.empty()) throw PreconditionError("persist_samples needs at least one sample");
  const nlohmann::json batch_samples = samples;
  StoredSamples out{path_for(paragraph_id), sha256_hex(batch_samples.dump()), false};
  std::lock_guard lock(mutex_);
  nlohmann::json doc = {{"paragraph_id", paragraph_id}, {"batches", nlohmann::json::array()}};
  if (fs::exists(out.path)) {
    try {
      doc = nlohmann::json::parse(read_file(out.path));
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("corrupt sample file " + out.path.string() + ": " + e.what());
    }
    for (const auto& b : doc.at("batches")) {
      if (b.at("digest").get<std::string>() == out.digest) {
        out.duplicate = true;
        return out;
      }
    }
  }
  doc["batches"].push_back({{"digest", out.digest}, {"samples", batch_samples}});
  if (!provenance_.is_null()) doc["provenance"] = provenance_;
  write_file_atomic(out.path, doc.dump(2) + "\n");
  return out;
}

void SampleStore::set_provenance(nlohmann::json provenance) {
  std::lock_guard lock(mutex_);
  provenance_ = std::move(provenance);
}

std::vector<std::string> SampleStore::read(const std::string& paragraph_id) const {
  const auto path = path_for(paragraph_id);
  std::lock_guard lock(mutex_);
  if (!fs::exists(path)) throw NotFound("no stored samples for paragraph '" + paragraph_id + "'");
  std::vector<std::string> out;
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    for (const auto& b : doc.at("batches")) {
      for (const auto& s : b.at("samples")) out.push_back(s.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt sample file " + path.string() + ": " + e.what());
  }
  return out;
}

bool SampleStore::contains(const std::string& paragraph_id) const {
  std::lock_guard lock(mutex_);
  return fs::exists(path_for(paragraph_id));
}

std::size_t SampleStore::count(const std::string& paragraph_id) const {
  return contains(paragraph_id) ? read(paragraph_id).size() : 0;
}

}  // namespace hallucheck::data

#include "hallucheck/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hallucheck/data.hpp"
#include "hallucheck/digest.hpp"
#include "hallucheck/embed.hpp"
#include "hallucheck/errors.hpp"
#include "hallucheck/http_backends.hpp"
#include "hallucheck/kgx.hpp"
#include "hallucheck/mock_backend.hpp"
#include "hallucheck/parallel.hpp"
#include "hallucheck/prompts.hpp"
#include "hallucheck/provider.hpp"
#include "hallucheck/score_io.hpp"

namespace hallucheck::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::vector<detect::DetectorConfig> all_detectors() {
  std::vector<detect::DetectorConfig> out;
  for (auto m : {Method::self_questioning, Method::self_confidence, Method::selfcheck}) {
    for (bool kg : {false, true}) {
      detect::DetectorConfig c;
      c.method = m;
      c.use_kg = kg;
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime wiring

struct Session {
  RunConfig config;
  PromptSet prompts;
  std::unique_ptr<provider::LlmClient> llm;
  std::shared_ptr<embed::Embedder> embedder;

  json provenance() const { return config.provenance(prompts.version); }
};

provider::MockScript default_mock_script() {
  provider::MockScript s;
  provider::MockRule extract;
  extract.match = {"TASK: EXTRACT_TRIPLES"};
  extract.generator = provider::MockGenerator::naive_triples;
  s.rules.push_back(extract);
  s.default_generator = provider::MockGenerator::hash_score;
  return s;
}

std::unique_ptr<provider::Backend> make_backend(const ProviderSection& p) {
  if (p.backend == "mock") {
    auto script = p.mock_script.empty() ? default_mock_script() : provider::MockScript::load(p.mock_script);
    return std::make_unique<provider::MockBackend>(std::move(script));
  }
  provider::RemoteConfig rc;
  rc.base_url = p.base_url;
  rc.timeout_seconds = p.timeout_seconds;
  if (p.backend == "openai") return provider::make_openai_backend(rc);
  if (p.backend == "gemini") return provider::make_gemini_backend(rc);
  throw ConfigError("provider.backend: unknown backend '" + p.backend + "'");
}

std::shared_ptr<embed::Embedder> make_embedder(const EmbeddingSection& e) {
  std::shared_ptr<embed::Embedder> inner;
  if (e.backend == "mock") {
    if (!e.mock_spec.empty()) {
      inner = embed::MockEmbedder::load(e.mock_spec);
    } else {
      inner = std::make_shared<embed::MockEmbedder>(e.dimension, e.seed, e.model_id);
    }
  } else if (e.backend == "http") {
    const char* key = std::getenv("HALLUCHECK_EMBED_KEY");
    inner = std::make_shared<embed::HttpEmbedder>(e.base_url, e.model_id, e.dimension, key ? key : "");
  } else {
    throw ConfigError("embedding.backend: unknown backend '" + e.backend + "'");
  }
  return std::make_shared<embed::MemoEmbedder>(inner);
}

Session open_session(const fs::path& config_path, bool need_llm = true) {
  Session s;
  s.config = RunConfig::load(config_path);
  s.prompts = s.config.prompts_dir ? load_prompts(*s.config.prompts_dir) : default_prompts();
  if (need_llm) {
    provider::ClientOptions opts;
    opts.retry.max_attempts = s.config.provider.max_attempts;
    opts.retry.initial_backoff = std::chrono::milliseconds(s.config.provider.initial_backoff_ms);
    opts.requests_per_minute = s.config.provider.requests_per_minute;
    if (!s.config.cache_dir.empty()) opts.cache_dir = s.config.cache_dir;
    s.llm = std::make_unique<provider::LlmClient>(make_backend(s.config.provider), opts);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dataset units

struct Unit {
  GeneratedOutput output;
  std::string group;  // samples are stored per group (WikiBio paragraph)
  std::string sample_prompt;
  std::optional<eval::Label> label;
  std::vector<std::string> samples;
};

std::string simpleqa_id(std::size_t row) { return fmt::format("simpleqa-{:05d}", row); }

std::vector<Unit> load_units(const DatasetSection& d, const PromptSet& prompts) {
  if (d.path.empty()) throw ConfigError("dataset.path is not set");
  std::vector<Unit> units;
  if (d.kind == "wikibio") {
    auto records = data::load_wikibio(d.path, {d.expected_samples});
    std::map<std::string, std::map<int, std::string>> paragraphs;
    for (const auto& r : records) paragraphs[r.paragraph_id][r.sentence_index] = r.sentence;
    for (auto& r : records) {
      std::string paragraph;
      for (const auto& [i, sentence] : paragraphs[r.paragraph_id]) paragraph += (paragraph.empty() ? "" : " ") + sentence;
      Unit u;
      u.output = {r.paragraph_id, r.sentence_index, r.sentence, paragraph};
      u.group = r.paragraph_id;
      u.sample_prompt = render_template(prompts.sample_passage, {{"CONCEPT", r.concept_name}});
      u.label = r.label;
      u.samples = std::move(r.samples);
      units.push_back(std::move(u));
    }
  } else if (d.kind == "simpleqa") {
    const auto records = data::load_simpleqa(d.path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!r.model_answer) continue;
      Unit u;
      u.output = {simpleqa_id(i + 1), 0, *r.model_answer, r.question};
      u.group = u.output.prompt_id;
      u.sample_prompt = r.question;
      u.label = r.label;
      units.push_back(std::move(u));
    }
  } else {
    throw ConfigError("dataset.kind: unknown kind '" + d.kind + "'");
  }
  return units;
}

/// Plain text: one sentence per non-blank line. JSON lines: WikiBio records.
std::vector<Unit> load_extract_input(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("input not found: " + path.string());
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") {
    DatasetSection d;
    d.path = path;
    d.expected_samples = 0;
    return load_units(d, default_prompts());
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Unit> units;
  int index = 0;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    Unit u;
    u.output = {path.stem().string(), index++, trim(line), std::nullopt};
    units.push_back(std::move(u));
  }
  if (units.empty()) throw SchemaError(path.string() + ": no sentences");
  return units;
}

// ---------------------------------------------------------------------------
// Output helpers

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
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

/// Append-only JSON-lines writer; each line is flushed so an interrupted run
/// leaves at most one truncated record at the end.
class LineSink {
public:
  LineSink(const fs::path& path, bool truncate) : path_(path) {
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    out_.open(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  void write(const json& j) {
    std::lock_guard lock(mutex_);
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

[[noreturn]] void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  throw std::logic_error("rethrow_first without an error");
}

bool any_error(const std::vector<std::exception_ptr>& errors) {
  return std::any_of(errors.begin(), errors.end(), [](const auto& e) { return static_cast<bool>(e); });
}

std::size_t batch_size(const RunConfig& c) { return std::max<std::size_t>(c.parallelism, 1) * 4; }

// ---------------------------------------------------------------------------
// Commands

struct ExtractArgs {
  std::string config, input, output;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  Session s = open_session(a.config);
  const auto units = load_extract_input(a.input);
  const fs::path output = a.output.empty() ? s.config.output_dir / "kgs.jsonl" : fs::path(a.output);
  kgx::ExtractOptions opts{s.config.provider.model_id, kgx::ExtractionPromptTemplate::from(s.prompts)};
  const json prov = s.provenance();

  LineSink sink(output, true);
  const std::size_t step = batch_size(s.config);
  for (std::size_t begin = 0; begin < units.size(); begin += step) {
    const std::size_t n = std::min(step, units.size() - begin);
    std::vector<std::optional<kgx::Extraction>> batch(n);
    auto errors = parallel_for_bounded(n, s.config.parallelism, [&](std::size_t i) {
      const auto& o = units[begin + i].output;
      batch[i] = kgx::extract_kg(o.text, *s.llm, opts, o.context);
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (!batch[i]) continue;
      json line = kgx::kg_record(*batch[i]);
      line["example_ref"] = OutputRef{units[begin + i].output.prompt_id, units[begin + i].output.sentence_index}.str();
      line["provenance"] = prov;
      sink.write(line);
    }
    if (any_error(errors)) rethrow_first(errors);
  }
  out << fmt::format("extracted {} knowledge graph(s) -> {}\n", units.size(), output.string());
  return kOk;
}

struct SamplesArgs {
  std::string config;
  std::optional<std::size_t> n;
};

int cmd_samples(const SamplesArgs& a, std::ostream& out) {
  Session s = open_session(a.config);
  std::size_t n = 0;
  if (a.n) {
    n = *a.n;
  } else {
    for (const auto& d : s.config.detectors) n = std::max(n, d.n_samples);
    if (n == 0) n = 20;
  }
  if (n == 0) throw ConfigError("samples: n must be at least 1");

  const auto units = load_units(s.config.dataset, s.prompts);
  data::SampleStore store(s.config.samples_dir);
  store.set_provenance(s.provenance());
  std::set<std::string> seen;
  std::size_t written = 0, skipped = 0;
  for (const auto& u : units) {
    if (!seen.insert(u.group).second) continue;
    if (store.count(u.group) >= n) {
      ++skipped;
      continue;
    }
    const auto req = provider::ChatRequest::user(s.config.provider.model_id, u.sample_prompt, provider::detect_profile());
    std::vector<std::string> texts;
    for (auto& r : s.llm->sample_n(req, n)) texts.push_back(std::move(r.content));
    const auto stored = store.persist(u.group, texts);
    if (stored.duplicate) {
      ++skipped;
    } else {
      written += texts.size();
    }
  }
  out << fmt::format("stored {} sample(s) for {} group(s), {} already present -> {}\n", written,
                     seen.size() - skipped, skipped, s.config.samples_dir.string());
  return kOk;
}

struct ScoreArgs {
  std::string config;
  std::vector<std::string> methods;
  bool fresh = false;
  std::optional<std::size_t> limit;
  std::string output;
};

std::vector<detect::DetectorConfig> select_detectors(const std::vector<detect::DetectorConfig>& all,
                                                     const std::vector<std::string>& wanted) {
  if (wanted.empty()) return all;
  std::vector<detect::DetectorConfig> out;
  for (const auto& d : all) {
    const bool hit = std::any_of(wanted.begin(), wanted.end(), [&](const std::string& w) {
      return w == d.label() || w == method_name(d.method);
    });
    if (hit) out.push_back(d);
  }
  for (const auto& w : wanted) {
    const bool known = std::any_of(all.begin(), all.end(),
                                   [&](const auto& d) { return w == d.label() || w == method_name(d.method); });
    if (!known) throw ConfigError("--methods: '" + w + "' is not among the configured detectors");
  }
  return out;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  Session s = open_session(a.config);
  s.embedder = make_embedder(s.config.embedding);
  auto units = load_units(s.config.dataset, s.prompts);
  if (a.limit && *a.limit < units.size()) units.resize(*a.limit);
  const auto detectors = select_detectors(s.config.detectors, a.methods);

  // Samples: stored batches win over those shipped inside the dataset.
  const bool needs_samples =
      std::any_of(detectors.begin(), detectors.end(), [](const auto& d) { return d.method == Method::selfcheck; });
  if (needs_samples) {
    std::size_t need = 0;
    for (const auto& d : detectors) {
      if (d.method == Method::selfcheck) need = std::max(need, d.n_samples);
    }
    data::SampleStore store(s.config.samples_dir);
    std::map<std::string, std::vector<std::string>> by_group;
    for (auto& u : units) {
      auto it = by_group.find(u.group);
      if (it == by_group.end()) {
        auto stored = store.contains(u.group) ? store.read(u.group) : std::vector<std::string>{};
        it = by_group.emplace(u.group, std::move(stored)).first;
      }
      if (!it->second.empty()) u.samples = it->second;
      if (u.samples.size() < need) {
        throw ConfigError(fmt::format(
            "selfcheck needs {} samples for '{}' but {} are available; generate them with `hallucheck samples` "
            "(persist_samples) first",
            need, u.group, u.samples.size()));
      }
    }
  }

  const fs::path stream = a.output.empty() ? s.config.output_dir / "scores.jsonl" : fs::path(a.output);
  std::set<std::pair<std::string, std::string>> done;
  if (!a.fresh && fs::exists(stream)) {
    // Rewrite without any truncated tail so appends stay well-formed.
    const auto previous = read_score_stream(stream);
    std::string kept;
    for (const auto& r : previous) {
      done.emplace(r.label(), r.output_ref.str());
      kept += to_json(r).dump() + "\n";
    }
    write_text_atomic(stream, kept);
  }
  LineSink sink(stream, a.fresh);

  detect::KgMemo memo;
  detect::DetectorResources res;
  res.llm = s.llm.get();
  res.model_id = s.config.provider.model_id;
  res.embedder = s.embedder.get();
  res.prompts = &s.prompts;
  res.parallelism = s.config.parallelism;
  res.sample_kgs = &memo;

  std::size_t scored = 0, skipped = 0;
  for (const auto& d : detectors) {
    std::vector<const Unit*> todo;
    for (const auto& u : units) {
      if (done.count({d.label(), OutputRef{u.output.prompt_id, u.output.sentence_index}.str()})) {
        ++skipped;
      } else {
        todo.push_back(&u);
      }
    }
    const std::size_t step = batch_size(s.config);
    for (std::size_t begin = 0; begin < todo.size(); begin += step) {
      const std::size_t n = std::min(step, todo.size() - begin);
      std::vector<std::optional<ScoreRecord>> batch(n);
      auto errors = parallel_for_bounded(n, s.config.parallelism, [&](std::size_t i) {
        const Unit& u = *todo[begin + i];
        batch[i] = detect::run_detector(d, u.output, res, u.samples);
      });
      for (auto& r : batch) {
        if (!r) continue;
        r->config_digest = s.config.digest;
        r->seed = s.config.seed;
        if (s.config.deterministic) r->elapsed_ms = 0.0;
        sink.write(to_json(*r));
        ++scored;
      }
      if (any_error(errors)) rethrow_first(errors);
    }
  }
  out << fmt::format("scored {} record(s), {} already present -> {}\n", scored, skipped, stream.string());
  return kOk;
}

struct EvaluateArgs {
  std::string config;
  std::string scores;
  std::string labels;
  std::string objective = "both";
  bool balance = false;
  std::string output;
};

int method_rank(const std::string& label) {
  static const std::vector<std::string> order = {"self_questioning", "self_questioning+kg", "self_confidence",
                                                 "self_confidence+kg", "selfcheck", "selfcheck+kg"};
  const auto it = std::find(order.begin(), order.end(), label);
  return static_cast<int>(it - order.begin());
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  Session s = open_session(a.config, false);
  if (a.objective != "accuracy" && a.objective != "f1" && a.objective != "both") {
    throw ConfigError("--objective must be accuracy, f1 or both");
  }
  DatasetSection labels_src = s.config.dataset;
  if (!a.labels.empty()) labels_src.path = a.labels;
  labels_src.expected_samples = 0;
  std::map<std::string, eval::Label> labels;
  for (const auto& u : load_units(labels_src, s.prompts)) {
    if (u.label) labels[OutputRef{u.output.prompt_id, u.output.sentence_index}.str()] = *u.label;
  }

  const fs::path scores_path = a.scores.empty() ? s.config.output_dir / "scores.jsonl" : fs::path(a.scores);
  if (!fs::exists(scores_path)) throw IoError("scores not found: " + scores_path.string());
  const auto records = read_score_stream(scores_path);
  if (records.empty()) throw SchemaError(scores_path.string() + ": no score records");

  std::map<std::string, std::vector<eval::LabeledScore>> by_method;
  std::set<std::pair<std::string, std::string>> seen;
  std::set<std::string> prompt_versions, model_ids;
  for (const auto& r : records) {
    const std::string ref = r.output_ref.str();
    const auto it = labels.find(ref);
    if (it == labels.end()) throw RefMismatch("score for '" + ref + "' has no label in " + labels_src.path.string());
    if (!seen.emplace(r.label(), ref).second) {
      spdlog::warn("{}: duplicate score for {}; keeping the first", r.label(), ref);
      continue;
    }
    by_method[r.label()].push_back({r.score, it->second, ref});
    if (!r.prompt_version.empty()) prompt_versions.insert(r.prompt_version);
    if (!r.model_id.empty()) model_ids.insert(r.model_id);
    if (!r.embed_model_id.empty()) model_ids.insert(r.embed_model_id);
  }

  std::optional<std::set<std::string>> keep;
  if (a.balance) {
    std::vector<eval::LabeledScore> all;
    std::set<std::string> refs;
    for (const auto& [m, v] : by_method) {
      for (const auto& x : v) refs.insert(x.example_ref);
    }
    for (const auto& ref : refs) all.push_back({0.0, labels.at(ref), ref});
    keep.emplace();
    for (const auto& x : eval::balance_dataset(all, s.config.seed)) keep->insert(x.example_ref);
  }

  std::vector<std::string> methods;
  for (auto& [m, v] : by_method) {
    if (keep) {
      std::erase_if(v, [&](const auto& x) { return !keep->count(x.example_ref); });
    }
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.example_ref < y.example_ref; });
    methods.push_back(m);
  }
  std::sort(methods.begin(), methods.end(), [](const auto& x, const auto& y) {
    return std::make_pair(method_rank(x), x) < std::make_pair(method_rank(y), y);
  });

  const eval::EvalOptions opts{s.config.positive, s.config.bootstrap_resamples, s.config.seed};
  std::vector<eval::EvalReport> reports;
  json methods_json = json::array();
  for (const auto& m : methods) {
    reports.push_back(eval::evaluate_method(m, by_method.at(m), opts));
    methods_json.push_back(eval::to_json(reports.back()));
  }

  json comparisons = json::array();
  std::string comparison_text;
  for (const auto& m : methods) {
    if (m.ends_with("+kg") || !by_method.count(m + "+kg")) continue;
    const auto& base = by_method.at(m);
    const auto& kg = by_method.at(m + "+kg");
    std::vector<std::pair<std::string, eval::Metric>> metrics;
    if (a.objective != "f1") metrics.emplace_back("accuracy", eval::best_threshold_metric(eval::Objective::accuracy, opts.positive));
    if (a.objective != "accuracy") metrics.emplace_back("f1", eval::best_threshold_metric(eval::Objective::f1, opts.positive));
    metrics.emplace_back("auc_pr", eval::auc_pr_metric(opts.positive));
    for (const auto& [name, metric] : metrics) {
      const auto c = eval::compare_methods(base, kg, metric, opts.seed, opts.resamples);
      json cj = eval::to_json(c);
      cj["baseline"] = m;
      cj["variant"] = m + "+kg";
      cj["metric"] = name;
      comparisons.push_back(cj);
      comparison_text += fmt::format("{:<42} {:<8} {:+.4f} [{:+.4f}, {:+.4f}] {}\n", m + "+kg vs " + m, name,
                                     c.point_difference, c.difference.lo, c.difference.hi,
                                     c.significant ? "significant" : "not significant");
    }
  }

  json prov = s.config.provenance(prompt_versions.size() == 1 ? *prompt_versions.begin() : s.prompts.version);
  prov["model_ids"] = model_ids;
  prov["prompt_versions"] = prompt_versions;
  json report = {
      {"provenance", prov},
      {"scores", scores_path.string()},
      {"balanced", a.balance},
      {"objective", a.objective},
      {"positive_class", eval::label_name(opts.positive)},
      {"methods", methods_json},
      {"comparisons", comparisons},
  };
  const fs::path report_path = a.output.empty() ? s.config.output_dir / "report.json" : fs::path(a.output);
  write_text_atomic(report_path, report.dump(2) + "\n");

  std::string table = eval::format_table(reports);
  if (!comparison_text.empty()) table += "\n" + comparison_text;
  table += fmt::format("\nconfig {} seed {}\n", s.config.digest.substr(0, 12), s.config.seed);
  fs::path text_path = report_path;
  text_path.replace_extension(".txt");
  write_text_atomic(text_path, table);
  out << table;
  return kOk;
}

struct StatsArgs {
  std::string config, output;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  Session s = open_session(a.config, false);
  if (s.config.dataset.kind != "wikibio") throw ConfigError("stats needs a wikibio dataset");
  s.embedder = make_embedder(s.config.embedding);
  const auto records = data::load_wikibio(s.config.dataset.path, {s.config.dataset.expected_samples});
  json j = data::to_json(data::compute_stats(records, *s.embedder));
  j["provenance"] = s.provenance();
  j["provenance"]["embed_model_id"] = s.embedder->model_id();
  const fs::path path = a.output.empty() ? s.config.output_dir / "stats.json" : fs::path(a.output);
  write_text_atomic(path, j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return kOk;
}

struct GradeArgs {
  std::string config, input, output;
};

int cmd_grade(const GradeArgs& a, std::ostream& out) {
  Session s = open_session(a.config);
  auto records = data::load_simpleqa(a.input);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].model_answer && records[i].verdict.empty()) todo.push_back(i);
  }
  auto errors = parallel_for_bounded(todo.size(), s.config.parallelism, [&](std::size_t k) {
    records[todo[k]] = data::grade_simpleqa(records[todo[k]], *s.llm, s.config.provider.model_id, s.prompts);
  });
  // Graded rows are kept even when some fail, so a rerun only grades the rest.
  data::write_simpleqa(a.output, records);
  if (any_error(errors)) rethrow_first(errors);
  std::size_t acc = 0, hal = 0, skipped = 0;
  for (const auto& r : records) {
    if (!r.label) {
      ++skipped;
    } else {
      (*r.label == eval::Label::accurate ? acc : hal)++;
    }
  }
  out << fmt::format("graded {}: {} accurate, {} hallucinated, {} unlabeled -> {}\n", todo.size(), acc, hal, skipped,
                     a.output);
  return kOk;
}

int exit_code_for(std::ostream& err, const std::exception& e) {
  int code = 1;
  if (dynamic_cast<const ConfigError*>(&e)) {
    code = kConfig;
  } else if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProviderRefusal*>(&e) ||
             dynamic_cast<const SamplingError*>(&e) || dynamic_cast<const ScoreParseError*>(&e) ||
             dynamic_cast<const EmbedBackendError*>(&e) || dynamic_cast<const DetectorError*>(&e) ||
             dynamic_cast<const JudgeParseError*>(&e)) {
    code = kProvider;
  } else if (dynamic_cast<const Error*>(&e)) {
    code = kSchema;
  }
  err << "error: " << e.what() << "\n";
  return code;
}

constexpr const char* kExitHelp =
    "Exit codes: 0 ok, 2 configuration or usage error, 3 provider failure, 4 input/schema error.\n"
    "Credentials: HALLUCHECK_OPENAI_KEY, HALLUCHECK_GEMINI_KEY, HALLUCHECK_EMBED_KEY.";

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"provider", "embedding", "detectors", "dataset", "cache_dir", "output_dir", "samples_dir",
                  "prompts_dir", "seed", "parallelism", "bootstrap_resamples", "positive_class", "deterministic"},
                 "config");
  RunConfig c;
  c.raw = j;
  c.digest = sha256_hex(j.dump());

  if (j.contains("provider")) {
    const auto& p = j.at("provider");
    reject_unknown(p,
                   {"backend", "model_id", "mock_script", "base_url", "requests_per_minute", "timeout_seconds",
                    "max_attempts", "initial_backoff_ms"},
                   "provider");
    c.provider.backend = get_or<std::string>(p, "backend", "mock", "provider");
    c.provider.model_id = get_or<std::string>(p, "model_id", c.provider.model_id, "provider");
    c.provider.mock_script = resolve(base_dir, get_or<std::string>(p, "mock_script", "", "provider"));
    c.provider.base_url = get_or<std::string>(p, "base_url", "", "provider");
    c.provider.requests_per_minute = get_or<double>(p, "requests_per_minute", 0.0, "provider");
    c.provider.timeout_seconds = get_or<int>(p, "timeout_seconds", 120, "provider");
    c.provider.max_attempts = get_or<int>(p, "max_attempts", 3, "provider");
    c.provider.initial_backoff_ms = get_or<int>(p, "initial_backoff_ms", 1000, "provider");
    if (c.provider.model_id.empty()) throw ConfigError("provider.model_id is empty");
    if (c.provider.max_attempts < 1) throw ConfigError("provider.max_attempts must be at least 1");
    if (c.provider.requests_per_minute < 0) throw ConfigError("provider.requests_per_minute is negative");
  }
  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    reject_unknown(e, {"backend", "model_id", "dimension", "seed", "mock_spec", "base_url"}, "embedding");
    c.embedding.backend = get_or<std::string>(e, "backend", "mock", "embedding");
    c.embedding.model_id = get_or<std::string>(e, "model_id", c.embedding.model_id, "embedding");
    c.embedding.dimension = get_or<std::size_t>(e, "dimension", c.embedding.dimension, "embedding");
    c.embedding.seed = get_or<std::uint64_t>(e, "seed", 0, "embedding");
    c.embedding.mock_spec = resolve(base_dir, get_or<std::string>(e, "mock_spec", "", "embedding"));
    c.embedding.base_url = get_or<std::string>(e, "base_url", "", "embedding");
    if (c.embedding.dimension == 0) throw ConfigError("embedding.dimension must be positive");
  }
  if (j.contains("detectors")) {
    const auto& ds = j.at("detectors");
    if (!ds.is_array() || ds.empty()) throw ConfigError("detectors must be a non-empty array");
    for (const auto& d : ds) {
      reject_unknown(d, {"method", "use_kg", "n_samples"}, "detectors[]");
      detect::DetectorConfig dc;
      dc.method = parse_method(get_or<std::string>(d, "method", "", "detectors[]"));
      dc.use_kg = get_or<bool>(d, "use_kg", false, "detectors[]");
      dc.n_samples = get_or<std::size_t>(d, "n_samples", 20, "detectors[]");
      dc.validate();
      c.detectors.push_back(dc);
    }
  } else {
    c.detectors = all_detectors();
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d, {"path", "kind", "expected_samples"}, "dataset");
    c.dataset.path = resolve(base_dir, get_or<std::string>(d, "path", "", "dataset"));
    c.dataset.kind = get_or<std::string>(d, "kind", "wikibio", "dataset");
    c.dataset.expected_samples = get_or<std::size_t>(d, "expected_samples", 20, "dataset");
    if (c.dataset.kind != "wikibio" && c.dataset.kind != "simpleqa") {
      throw ConfigError("dataset.kind must be wikibio or simpleqa");
    }
  }
  c.cache_dir = resolve(base_dir, get_or<std::string>(j, "cache_dir", "cache", "config"));
  c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out", "config"));
  const auto samples = get_or<std::string>(j, "samples_dir", "", "config");
  c.samples_dir = samples.empty() ? c.output_dir / "samples" : resolve(base_dir, samples);
  if (const auto p = get_or<std::string>(j, "prompts_dir", "", "config"); !p.empty()) {
    c.prompts_dir = resolve(base_dir, p);
  }
  c.seed = get_or<std::uint64_t>(j, "seed", 42, "config");
  c.parallelism = get_or<std::size_t>(j, "parallelism", 1, "config");
  c.bootstrap_resamples = get_or<std::size_t>(j, "bootstrap_resamples", 1000, "config");
  c.deterministic = get_or<bool>(j, "deterministic", false, "config");
  try {
    c.positive = eval::parse_label(get_or<std::string>(j, "positive_class", "hallucinated", "config"));
  } catch (const SchemaError& e) {
    throw ConfigError(std::string("positive_class: ") + e.what());
  }
  if (c.parallelism == 0) throw ConfigError("parallelism must be at least 1");
  if (c.bootstrap_resamples == 0) throw ConfigError("bootstrap_resamples must be at least 1");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " does not parse: " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::provenance(const std::string& prompt_version) const {
  return {
      {"config_digest", digest},
      {"prompt_version", prompt_version},
      {"model_id", provider.model_id},
      {"provider_backend", provider.backend},
      {"embed_model_id", embedding.model_id},
      {"seed", seed},
  };
}

// ---------------------------------------------------------------------------
// Entry points

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph-augmented hallucination self-detection"};
  app.footer(kExitHelp);
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Build one knowledge graph per input sentence");
  extract->add_option("-c,--config", ex.config, "Run config (JSON)")->required();
  extract->add_option("-i,--input", ex.input, "Sentences: text (one per line) or WikiBio JSON lines")->required();
  extract->add_option("-o,--output", ex.output, "Output JSON lines (default <output_dir>/kgs.jsonl)");

  SamplesArgs sa;
  auto* samples = app.add_subcommand("samples", "Generate and store n samples per paragraph");
  samples->add_option("-c,--config", sa.config, "Run config (JSON)")->required();
  samples->add_option("-n,--n", sa.n, "Samples per paragraph (default: largest detector n_samples)");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Run the configured detectors over the dataset");
  score->add_option("-c,--config", sc.config, "Run config (JSON)")->required();
  score->add_option("-m,--methods", sc.methods, "Detector labels or method names to run")->delimiter(',');
  score->add_flag("--fresh", sc.fresh, "Discard existing scores instead of resuming");
  score->add_option("--limit", sc.limit, "Score only the first N examples");
  score->add_option("-o,--output", sc.output, "Score stream (default <output_dir>/scores.jsonl)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Threshold search, AUC-PR, bootstrap CIs and +KG comparisons");
  evaluate->add_option("-c,--config", ev.config, "Run config (JSON)")->required();
  evaluate->add_option("-s,--scores", ev.scores, "Score stream (default <output_dir>/scores.jsonl)");
  evaluate->add_option("-l,--labels", ev.labels, "Labelled dataset (default: the config's dataset)");
  evaluate->add_option("--objective", ev.objective, "accuracy|f1|both")->capture_default_str();
  evaluate->add_flag("--balance", ev.balance, "Subsample the majority label first");
  evaluate->add_option("-o,--output", ev.output, "Report JSON (default <output_dir>/report.json)");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Dataset statistics for a WikiBio file");
  stats->add_option("-c,--config", st.config, "Run config (JSON)")->required();
  stats->add_option("-o,--output", st.output, "Stats JSON (default <output_dir>/stats.json)");

  GradeArgs gr;
  auto* grade = app.add_subcommand("grade", "Label SimpleQA model answers with the judge model");
  grade->add_option("-c,--config", gr.config, "Run config (JSON)")->required();
  grade->add_option("-i,--input", gr.input, "SimpleQA CSV with a model_answer column")->required();
  grade->add_option("-o,--output", gr.output, "Graded CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kConfig;
  }

  const auto level = spdlog::level::from_str(log_level);
  if (level == spdlog::level::off && log_level != "off") {
    err << "error: unknown log level '" << log_level << "'\n";
    return kConfig;
  }
  spdlog::set_level(level);

  try {
    if (*extract) return cmd_extract(ex, out);
    if (*samples) return cmd_samples(sa, out);
    if (*score) return cmd_score(sc, out);
    if (*evaluate) return cmd_evaluate(ev, out);
    if (*stats) return cmd_stats(st, out);
    if (*grade) return cmd_grade(gr, out);
  } catch (const std::exception& e) {
    return exit_code_for(err, e);
  }
  return kConfig;
}

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hallucheck"));
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hallucheck::cli

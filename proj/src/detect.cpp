#include "hallucheck/detect.hpp"

#include <spdlog/spdlog.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <optional>

#include "hallucheck/errors.hpp"
#include "hallucheck/kernels.hpp"
#include "hallucheck/parallel.hpp"

namespace hallucheck::detect {

void DetectorConfig::validate() const {
  if (method == Method::selfcheck && n_samples == 0) throw PreconditionError("selfcheck needs n_samples >= 1");
}

double parse_score(std::string_view reply, ScoreParsePolicy) {
  auto digit = [&](std::size_t i) { return i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i])); };
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const bool starts = digit(i) || (reply[i] == '.' && digit(i + 1));
    if (!starts) continue;
    std::size_t b = i;
    if (b > 0 && reply[b - 1] == '-') --b;
    std::size_t e = i;
    while (digit(e)) ++e;
    if (e < reply.size() && reply[e] == '.' && digit(e + 1)) {
      ++e;
      while (digit(e)) ++e;
    }
    const std::string number(reply.substr(b, e - b));
    return clamp_unit(std::strtod(number.c_str(), nullptr));
  }
  throw ScoreParseError("no number in reply: '" + std::string(reply.substr(0, 80)) + "'");
}

kgx::Extraction KgMemo::get_or_extract(std::string_view text, provider::LlmClient& llm,
                                       const kgx::ExtractOptions& opts) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(text); it != memo_.end()) return it->second;
  }
  auto e = kgx::extract_kg(text, llm, opts);
  std::lock_guard lock(mutex_);
  return memo_.try_emplace(std::string(text), std::move(e)).first->second;
}

std::size_t KgMemo::size() const {
  std::lock_guard lock(mutex_);
  return memo_.size();
}

namespace {

provider::LlmClient& llm_of(const DetectorResources& res) {
  if (!res.llm) throw ConfigError("detector needs an LLM client");
  if (res.model_id.empty()) throw ConfigError("detector needs a model_id");
  return *res.llm;
}

embed::Embedder& embedder_of(const DetectorResources& res) {
  if (!res.embedder) throw ConfigError("detector needs an embedder");
  return *res.embedder;
}

std::string ask(const DetectorResources& res, std::string prompt) {
  const auto req = provider::ChatRequest::user(res.model_id, std::move(prompt), provider::detect_profile());
  return llm_of(res).complete(req).content;
}

kgx::ExtractOptions extract_options(const DetectorResources& res) {
  return {res.model_id, kgx::ExtractionPromptTemplate::from(*res.prompts)};
}

void require_text(const GeneratedOutput& o) {
  if (trim(o.text).empty()) throw PreconditionError("output text is empty");
  if (!looks_like_single_sentence(o.text)) {
    spdlog::debug("{}: output is not a single sentence; scoring it as one unit", OutputRef{o.prompt_id, o.sentence_index}.str());
  }
}

ScoreRecord base_record(const GeneratedOutput& o, Method m, bool kg) {
  ScoreRecord r;
  r.output_ref = {o.prompt_id, o.sentence_index};
  r.method = m;
  r.kg_used = kg;
  return r;
}

// Scores every triple of the output's graph with `score_one`, applying the miss
// policy: a triple whose score cannot be parsed is dropped and counted; the
// detector fails only when every triple fails.
template <typename ScoreOne>
ScoreRecord score_triples(const GeneratedOutput& o, Method m, const DetectorResources& res, ScoreOne&& score_one) {
  require_text(o);
  const auto ext = kgx::extract_kg(o.text, llm_of(res), extract_options(res), o.context);
  const auto& triples = ext.kg.triples();
  std::vector<std::optional<double>> scores(triples.size());
  const auto errors = parallel_for_bounded(triples.size(), res.parallelism,
                                           [&](std::size_t j) { scores[j] = score_one(triples[j]); });

  ScoreRecord r = base_record(o, m, true);
  r.degenerate_kg = ext.kg.degenerate();
  r.parse_losses = ext.parse_losses;
  std::vector<TripleScore> kept;
  for (std::size_t j = 0; j < triples.size(); ++j) {
    if (errors[j]) {
      try {
        std::rethrow_exception(errors[j]);
      } catch (const ScoreParseError& e) {
        spdlog::warn("{}: triple '{}' dropped: {}", r.output_ref.str(), embed::triple_text(triples[j]), e.what());
        ++r.missed_triples;
        continue;
      }
    }
    kept.push_back({triples[j], *scores[j]});
  }
  if (kept.empty()) {
    throw DetectorError("all " + std::to_string(triples.size()) + " triple(s) failed to score");
  }
  r.score = mean_of(kept);
  r.triple_scores = std::move(kept);
  return r;
}

kernels::Matrix rows_of(std::span<const embed::EmbeddingVector> vecs, std::size_t dim) {
  kernels::Matrix m(vecs.size(), dim);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    const auto& v = vecs[i].values;
    if (v.size() != dim) throw DimensionMismatch("embedding width changed within one call");
    bool nonzero = false;
    for (double x : v) nonzero = nonzero || x != 0.0;
    if (!nonzero) throw ZeroVector("embedder returned a zero vector");
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

void require_samples(std::span<const std::string> samples) {
  if (samples.empty()) throw PreconditionError("selfcheck needs at least one sample");
  for (const auto& s : samples) {
    if (trim(s).empty()) throw PreconditionError("selfcheck sample is empty");
  }
}

}  // namespace

QAStep verify_statement(std::string_view statement, const DetectorResources& res) {
  const auto& p = *res.prompts;
  QAStep step;
  step.question = trim(ask(res, render_template(p.verify_question, {{"STATEMENT", std::string(statement)}})));
  step.answer = trim(ask(res, render_template(p.verify_answer, {{"QUESTION", step.question}})));
  const std::string reply = ask(res, render_template(p.consistency, {{"STATEMENT", std::string(statement)},
                                                                      {"QUESTION", step.question},
                                                                      {"ANSWER", step.answer}}));
  step.consistency = parse_score(reply);
  return step;
}

double elicit_confidence(std::string_view statement, const DetectorResources& res) {
  return parse_score(ask(res, render_template(res.prompts->confidence, {{"STATEMENT", std::string(statement)}})));
}

ScoreRecord self_questioning(const GeneratedOutput& o, const DetectorResources& res) {
  require_text(o);
  ScoreRecord r = base_record(o, Method::self_questioning, false);
  r.score = verify_statement(o.text, res).consistency;
  return r;
}

ScoreRecord self_questioning_kg(const GeneratedOutput& o, const DetectorResources& res) {
  return score_triples(o, Method::self_questioning, res,
                       [&](const Triple& t) { return verify_statement(embed::triple_text(t), res).consistency; });
}

ScoreRecord self_confidence(const GeneratedOutput& o, const DetectorResources& res) {
  require_text(o);
  ScoreRecord r = base_record(o, Method::self_confidence, false);
  r.score = elicit_confidence(o.text, res);
  return r;
}

ScoreRecord self_confidence_kg(const GeneratedOutput& o, const DetectorResources& res) {
  return score_triples(o, Method::self_confidence, res,
                       [&](const Triple& t) { return elicit_confidence(embed::triple_text(t), res); });
}

ScoreRecord selfcheck(const GeneratedOutput& o, std::span<const std::string> samples, const DetectorResources& res) {
  require_text(o);
  require_samples(samples);
  auto& emb = embedder_of(res);
  const std::vector<embed::EmbeddingVector> out_vec{emb.embed(o.text)};
  std::vector<kernels::Matrix> sample_rows;
  sample_rows.reserve(samples.size());
  for (const auto& s : samples) {
    const std::vector<embed::EmbeddingVector> v{emb.embed(s)};
    sample_rows.push_back(rows_of(v, emb.dimension()));
  }
  ScoreRecord r = base_record(o, Method::selfcheck, false);
  r.score = kernels::max_then_mean_parallel(rows_of(out_vec, emb.dimension()), sample_rows).front();
  return r;
}

ScoreRecord selfcheck_kg(const GeneratedOutput& o, std::span<const std::string> samples,
                         const DetectorResources& res) {
  require_text(o);
  require_samples(samples);
  auto& llm = llm_of(res);
  auto& emb = embedder_of(res);
  const auto opts = extract_options(res);

  const auto ext = kgx::extract_kg(o.text, llm, opts, o.context);

  KgMemo local;
  KgMemo& memo = res.sample_kgs ? *res.sample_kgs : local;
  std::vector<std::optional<kgx::Extraction>> sample_kgs(samples.size());
  const auto sample_errors = parallel_for_bounded(samples.size(), res.parallelism, [&](std::size_t k) {
    sample_kgs[k] = memo.get_or_extract(samples[k], llm, opts);
  });
  for (const auto& e : sample_errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<kernels::Matrix> sample_rows;
  sample_rows.reserve(samples.size());
  for (const auto& skg : sample_kgs) {
    std::vector<embed::EmbeddingVector> vecs;
    for (const auto& t : skg->kg.triples()) vecs.push_back(emb.embed(embed::triple_text(t)));
    sample_rows.push_back(rows_of(vecs, emb.dimension()));
  }

  // Miss policy: an output triple that cannot be embedded is dropped.
  ScoreRecord r = base_record(o, Method::selfcheck, true);
  r.degenerate_kg = ext.kg.degenerate();
  r.parse_losses = ext.parse_losses;
  std::vector<Triple> kept;
  std::vector<embed::EmbeddingVector> out_vecs;
  for (const auto& t : ext.kg.triples()) {
    try {
      out_vecs.push_back(emb.embed(embed::triple_text(t)));
      kept.push_back(t);
    } catch (const EmbedBackendError& e) {
      spdlog::warn("{}: triple '{}' dropped: {}", r.output_ref.str(), embed::triple_text(t), e.what());
      ++r.missed_triples;
    }
  }
  if (kept.empty()) {
    throw DetectorError("all " + std::to_string(ext.kg.size()) + " triple(s) failed to embed");
  }
  const auto c = kernels::max_then_mean_parallel(rows_of(out_vecs, emb.dimension()), sample_rows);
  std::vector<TripleScore> ts;
  ts.reserve(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) ts.push_back({kept[j], c[j]});
  r.score = mean_of(ts);
  r.triple_scores = std::move(ts);
  r.embed_model_id = emb.model_id();
  return r;
}

namespace {

template <typename Fn>
ScoreRecord with_context(const std::string& label, Fn&& fn) {
  const std::string p = label + ": ";
  try {
    return fn();
  } catch (const PreconditionError& e) {
    throw PreconditionError(p + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(p + e.what());
  } catch (const TransportError& e) {
    throw TransportError(p + e.what());
  } catch (const ProviderRefusal& e) {
    throw ProviderRefusal(p + e.what());
  } catch (const ScoreParseError& e) {
    throw ScoreParseError(p + e.what());
  } catch (const EmbedBackendError& e) {
    throw EmbedBackendError(p + e.what());
  } catch (const DetectorError& e) {
    throw DetectorError(p + e.what());
  } catch (const Error& e) {
    throw DetectorError(p + e.what());
  }
}

}  // namespace

ScoreRecord run_detector(const DetectorConfig& config, const GeneratedOutput& o, const DetectorResources& res,
                         std::span<const std::string> samples) {
  const std::string label = config.label();
  const auto started = std::chrono::steady_clock::now();
  ScoreRecord r = with_context(label, [&] {
    config.validate();
    switch (config.method) {
      case Method::self_questioning:
        return config.use_kg ? self_questioning_kg(o, res) : self_questioning(o, res);
      case Method::self_confidence:
        return config.use_kg ? self_confidence_kg(o, res) : self_confidence(o, res);
      case Method::selfcheck: {
        if (samples.empty()) throw PreconditionError("no samples provided");
        if (samples.size() < config.n_samples) {
          throw PreconditionError("needs " + std::to_string(config.n_samples) + " samples, got " +
                                  std::to_string(samples.size()));
        }
        const auto used = samples.first(config.n_samples);
        return config.use_kg ? selfcheck_kg(o, used, res) : selfcheck(o, used, res);
      }
    }
    throw ConfigError("unknown method");
  });
  r.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  r.prompt_version = config.prompt_version.empty() ? res.prompts->version : config.prompt_version;
  if (config.method != Method::selfcheck || config.use_kg) r.model_id = res.model_id;
  if (config.method == Method::selfcheck && res.embedder) r.embed_model_id = res.embedder->model_id();
  return r;
}

}  // namespace hallucheck::detect

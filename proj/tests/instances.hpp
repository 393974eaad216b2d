#pragma once

// Random detector scenarios: an output sentence with its extracted triples,
// sample passages with theirs, fixed embeddings for every triple and scripted
// per-triple confidences. The same scenario can be re-materialized after
// shuffling triples or samples.

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucheck/detect.hpp"
#include "hallucheck/embed.hpp"
#include "hallucheck/mock_backend.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace instances {

struct ScriptedTriple {
  std::string s, r, o;
  std::vector<double> vec;
  double confidence = 0.5;
  double consistency = 0.5;

  std::string text() const { return s + " " + r + " " + o; }
};

struct Sample {
  std::string text;
  std::vector<ScriptedTriple> triples;  // empty: extraction yields nothing
  std::vector<double> pseudo_vec;       // embedding of the degenerate pseudo-triple
};

struct Scenario {
  std::string output_text;
  std::vector<ScriptedTriple> output;
  std::vector<Sample> samples;
  std::size_t dim = 8;
};

struct Limits {
  int max_triples = 5;
  int max_samples = 5;
  int max_sample_triples = 5;
  std::size_t dim = 8;
};

inline Scenario random_scenario(std::mt19937_64& rng, int id, const Limits& lim = {}) {
  std::uniform_int_distribution<int> nt(1, lim.max_triples), ns(1, lim.max_samples), nst(0, lim.max_sample_triples);
  std::uniform_int_distribution<int> pct(0, 100);
  Scenario sc;
  sc.dim = lim.dim;
  sc.output_text = "Output sentence number " + std::to_string(id) + " under test.";
  const int n_out = nt(rng);
  for (int j = 0; j < n_out; ++j) {
    ScriptedTriple t{"subj" + std::to_string(j) + "x", "rel", "obj" + std::to_string(j) + "x",
                     testing_support::random_vector(rng, lim.dim), pct(rng) / 100.0, pct(rng) / 100.0};
    sc.output.push_back(std::move(t));
  }
  const int n_samples = ns(rng);
  for (int k = 0; k < n_samples; ++k) {
    Sample s;
    s.text = "Sample passage " + std::to_string(k) + " for output " + std::to_string(id) + ".";
    const int m = nst(rng);
    for (int i = 0; i < m; ++i) {
      s.triples.push_back({"samp" + std::to_string(k) + "t" + std::to_string(i) + "x", "rel", "val",
                           testing_support::random_vector(rng, lim.dim)});
    }
    s.pseudo_vec = testing_support::random_vector(rng, lim.dim);
    sc.samples.push_back(std::move(s));
  }
  return sc;
}

inline std::string triples_json(const std::vector<ScriptedTriple>& ts) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : ts) j.push_back({t.s, t.r, t.o});
  return j.dump();
}

inline std::string fmt_score(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

/// Mock script and embedder reproducing the scenario.
struct Materialized {
  hallucheck::provider::MockScript script;
  std::shared_ptr<hallucheck::embed::MockEmbedder> embedder;
  std::vector<std::string> sample_texts;
  hallucheck::GeneratedOutput output;
};

inline Materialized materialize(const Scenario& sc) {
  using hallucheck::provider::MockRule;
  Materialized m;
  m.embedder = std::make_shared<hallucheck::embed::MockEmbedder>(sc.dim, 0, "scenario-embed");
  auto extraction = [&](const std::string& text, const std::string& reply) {
    m.script.rules.push_back(MockRule{{"TASK: EXTRACT_TRIPLES", "<passage>" + text + "</passage>"}, {reply}});
  };
  extraction(sc.output_text, triples_json(sc.output));
  for (const auto& t : sc.output) {
    const std::string stmt = "<statement>" + t.text() + "</statement>";
    m.script.rules.push_back(MockRule{{"TASK: CONFIDENCE_SCORE", stmt}, {fmt_score(t.confidence)}});
    m.script.rules.push_back(MockRule{{"TASK: CONSISTENCY_SCORE", stmt}, {fmt_score(t.consistency)}});
    m.embedder->set(t.text(), t.vec);
  }
  for (const auto& s : sc.samples) {
    extraction(s.text, triples_json(s.triples));
    for (const auto& t : s.triples) m.embedder->set(t.text(), t.vec);
    m.embedder->set("statement states " + s.text, s.pseudo_vec);
    m.sample_texts.push_back(s.text);
  }
  m.script.rules.push_back(MockRule{{"TASK: CONFIDENCE_SCORE"}, {"0.5"}});
  m.script.default_generator = hallucheck::provider::MockGenerator::hash_score;
  m.output = {"scenario", 0, sc.output_text, std::nullopt};
  return m;
}

/// Eq. 8-9 by brute force over the scenario's own vectors.
inline double selfcheck_kg_oracle(const Scenario& sc) {
  oracle::Vecs out;
  for (const auto& t : sc.output) out.push_back(t.vec);
  std::vector<oracle::Vecs> samples;
  for (const auto& s : sc.samples) {
    oracle::Vecs rows;
    if (s.triples.empty()) {
      rows.push_back(s.pseudo_vec);
    } else {
      for (const auto& t : s.triples) rows.push_back(t.vec);
    }
    samples.push_back(std::move(rows));
  }
  return oracle::mean(oracle::max_then_mean(out, samples));
}

inline double confidence_mean(const Scenario& sc) {
  std::vector<double> v;
  for (const auto& t : sc.output) v.push_back(std::stod(fmt_score(t.confidence)));
  return oracle::mean(v);
}

inline double consistency_mean(const Scenario& sc) {
  std::vector<double> v;
  for (const auto& t : sc.output) v.push_back(std::stod(fmt_score(t.consistency)));
  return oracle::mean(v);
}

inline Scenario shuffled(Scenario sc, std::mt19937_64& rng) {
  std::shuffle(sc.output.begin(), sc.output.end(), rng);
  std::shuffle(sc.samples.begin(), sc.samples.end(), rng);
  for (auto& s : sc.samples) std::shuffle(s.triples.begin(), s.triples.end(), rng);
  return sc;
}

/// Runs one detector over a materialized scenario with a fresh client.
inline hallucheck::ScoreRecord run(const Materialized& m, hallucheck::Method method, bool kg,
                                   std::size_t parallelism = 1) {
  testing_support::MockClient client(m.script);
  hallucheck::detect::DetectorResources res;
  res.llm = client.client.get();
  res.model_id = "gpt-4o";
  res.embedder = m.embedder.get();
  res.parallelism = parallelism;
  hallucheck::detect::DetectorConfig cfg;
  cfg.method = method;
  cfg.use_kg = kg;
  cfg.n_samples = m.sample_texts.size();
  return hallucheck::detect::run_detector(cfg, m.output, res, m.sample_texts);
}

}  // namespace instances

#include "hallucheck/score_io.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

#include "hallucheck/errors.hpp"

namespace hallucheck {

nlohmann::json to_json(const ScoreRecord& r) {
  nlohmann::json j = {
      {"example_ref", r.output_ref.str()},
      {"prompt_id", r.output_ref.prompt_id},
      {"sentence_index", r.output_ref.sentence_index},
      {"method", method_name(r.method)},
      {"kg_used", r.kg_used},
      {"label", r.label()},
      {"score", r.score},
      {"missed_triples", r.missed_triples},
      {"parse_losses", r.parse_losses},
      {"degenerate_kg", r.degenerate_kg},
      {"prompt_version", r.prompt_version},
      {"model_id", r.model_id},
      {"embed_model_id", r.embed_model_id},
      {"elapsed_ms", r.elapsed_ms},
      {"config_digest", r.config_digest},
      {"seed", r.seed},
  };
  if (r.triple_scores) {
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : *r.triple_scores) {
      ts.push_back({{"triple", {t.triple.subject(), t.triple.relation(), t.triple.object()}}, {"score", t.score}});
    }
    j["triple_scores"] = std::move(ts);
  } else {
    j["triple_scores"] = nullptr;
  }
  return j;
}

ScoreRecord score_record_from_json(const nlohmann::json& j) {
  std::string field;
  try {
    ScoreRecord r;
    auto get = [&](const char* name) -> const nlohmann::json& {
      field = name;
      return j.at(name);
    };
    r.output_ref.prompt_id = get("prompt_id").get<std::string>();
    r.output_ref.sentence_index = get("sentence_index").get<int>();
    r.method = parse_method(get("method").get<std::string>());
    r.kg_used = get("kg_used").get<bool>();
    r.score = get("score").get<double>();
    if (!(r.score >= 0.0 && r.score <= 1.0)) throw SchemaError("score outside [0,1]");
    field = "triple_scores";
    if (j.contains("triple_scores") && !j["triple_scores"].is_null()) {
      std::vector<TripleScore> ts;
      for (const auto& t : j["triple_scores"]) {
        const auto& tr = t.at("triple");
        ts.push_back({Triple(tr.at(0).get<std::string>(), tr.at(1).get<std::string>(), tr.at(2).get<std::string>()),
                      t.at("score").get<double>()});
      }
      r.triple_scores = std::move(ts);
    }
    field = "telemetry";
    r.missed_triples = j.value("missed_triples", 0);
    r.parse_losses = j.value("parse_losses", 0);
    r.degenerate_kg = j.value("degenerate_kg", false);
    r.prompt_version = j.value("prompt_version", std::string());
    r.model_id = j.value("model_id", std::string());
    r.embed_model_id = j.value("embed_model_id", std::string());
    r.elapsed_ms = j.value("elapsed_ms", 0.0);
    r.config_digest = j.value("config_digest", std::string());
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("score record field '" + field + "': " + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError("score record field '" + field + "': " + e.what());
  }
}

std::vector<ScoreRecord> read_score_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score stream " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) lines.push_back(std::move(line));
  }
  std::vector<ScoreRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      if (i + 1 == lines.size()) {
        spdlog::warn("{}: ignoring truncated last line", path.string());
        break;
      }
      throw SchemaError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    try {
      out.push_back(score_record_from_json(j));
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hallucheck

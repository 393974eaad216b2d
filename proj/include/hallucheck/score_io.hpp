#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucheck/core.hpp"

namespace hallucheck {

/// One ScoreRecord as a JSON object; the line format of score streams.
nlohmann::json to_json(const ScoreRecord& r);

/// Throws SchemaError naming the offending field.
ScoreRecord score_record_from_json(const nlohmann::json& j);

/// Reads a JSON-lines score stream. A truncated final line (interrupted
/// writer) is ignored with a warning; any other malformed line is a SchemaError.
std::vector<ScoreRecord> read_score_stream(const std::filesystem::path& path);

}  // namespace hallucheck

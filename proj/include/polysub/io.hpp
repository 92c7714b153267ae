#pragma once

#include <string>

#include <json.hpp>

#include "polysub/growth.hpp"

namespace polysub {

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

Json stage_to_json(const GluingSpec& spec, const TilingStage& stage);
TilingStage stage_from_json(const GluingSpec& spec, const Json& j);

Json hypothesis_to_json(const HypothesisReport& rep);
Json stage_report_to_json(const StageReport& rep);
Json stage_stats_to_json(const GluingSpec& spec, const TilingStage& stage);

// deterministic rendering with a trailing newline
std::string dump_json(const Json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

const char* status_name(EdgeStatus s);

}  // namespace polysub

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "actnet/aggregation.hpp"

namespace actnet {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const ModelState& m);
ModelState model_from_json(const nlohmann::json& j);

void save_model(const ModelState& m, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

/// Serializes with a trailing newline; output bytes depend only on the values.
std::string dump_json(const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace actnet

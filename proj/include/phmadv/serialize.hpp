#pragma once

// JSON containers for models and residual statistics.
//
//   {
//     "format": "phmadv.model" | "phmadv.residual_stats",
//     "format_version": 1,
//     "architecture": {...},             // models only
//     "parameters": [{"name": ..., "shape": [...], "data": "<base64>"}, ...],
//     "standardizer": {"mean": {...}, "stddev": {...}},   // optional
//     "metadata": {...}
//   }
//
// "data" is base64 of the little-endian IEEE-754 float64 values in row-major
// order, so a save/load round trip is bit-exact.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "phmadv/anomaly.hpp"
#include "phmadv/data.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/parameters.hpp"
#include "phmadv/rul_model.hpp"

namespace phmadv {

constexpr int kFormatVersion = 1;

std::string encode_base64(std::span<const double> values);
std::vector<double> decode_base64(const std::string& text);

nlohmann::json tensor_to_json(const std::string& name, const Tensor& t);
Parameter tensor_from_json(const nlohmann::json& j);

struct ModelFile {
  std::variant<NormalityModel, RulModel> model;
  std::optional<Standardizer> standardizer;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json model_to_json(const ModelFile& file);
ModelFile model_from_json(const nlohmann::json& j);

struct StatsFile {
  ResidualStats stats;
  double threshold = 0.0;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json stats_to_json(const StatsFile& file);
StatsFile stats_from_json(const nlohmann::json& j);

/// Pretty-printed JSON with a trailing newline.
void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace phmadv

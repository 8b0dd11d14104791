#pragma once

#include "isurv/data.hpp"
#include "isurv/models.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace isurv {

inline constexpr int kModelFormatVersion = 1;

/// A trained model plus the column preprocessing fitted with it, if any.
struct SavedModel {
  TrainedModel model;
  std::optional<Preprocessor> preprocessor;
};

nlohmann::ordered_json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json model_to_json(const SavedModel& saved);
SavedModel model_from_json(const nlohmann::ordered_json& j);

void save_model(const SavedModel& saved, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

/// Writes `text` to `path`, raising IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace isurv

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "geomatch/location_models.hpp"

namespace geomatch {

/// Self-describing JSON: init value, rate, params, schema, fingerprint and
/// flattened per-tree node arrays.
std::string model_to_json(const BoostedModel& model);
BoostedModel model_from_json(std::string_view text);

/// Writes `location_<id>.model.json` per modeled location and a
/// `modelset.json` manifest, and records the content hash on `models`.
void save_modelset(const std::filesystem::path& dir, ModelSet& models);
/// Loads a model set and recomputes its content hash from the file bytes.
ModelSet load_modelset(const std::filesystem::path& dir);

/// CSV of (location, depth, rate, bag, best_trees, cv_rmse), one row per grid cell.
void write_tuning_report(const std::filesystem::path& path, const ModelSet& models);
/// CSV of (location, feature, relative_influence).
void write_importance(const std::filesystem::path& path, const ModelSet& models);

}  // namespace geomatch

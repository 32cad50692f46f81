#pragma once

#include <filesystem>
#include <string>

#include "geomatch/backtest.hpp"
#include "geomatch/dataset.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/recommender.hpp"
#include "geomatch/synthetic.hpp"

namespace geomatch::fixtures {

/// Small fast grid: one cell, 3 folds, short horizon.
TuningGrid quick_grid();

/// A trained end-to-end pipeline on a small synthetic world, built once per
/// process and shared read-only.
struct SmallPipeline {
  Dataset train;
  SyntheticGroundTruth train_truth;
  Dataset clients;
  SyntheticGroundTruth clients_truth;
  ModelSet models;
  MultinomialLogitModel mnl;
  PredictionMatrix matrix;
  std::vector<PreferenceRanking> rankings;

  BacktestData backtest() const;
};

const SmallPipeline& small_pipeline();

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace geomatch::fixtures

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geomatch/boosting.hpp"
#include "geomatch/dataset.hpp"

namespace geomatch {

/// Location-level predictors appended to the client covariates at model
/// time. Every per-location prediction substitutes the attributes of the
/// location being scored.
std::vector<FeatureSpec> location_feature_specs();
CovariateVector with_location(const CovariateVector& base, const Location& location);

struct LocationModelInfo {
  int location_id = 0;
  std::size_t sample_count = 0;
  bool modeled = false;
  BoostParams params;
  double cv_rmse = 0.0;
  double cv_sse = 0.0;
  /// Sum of squares of the (capped) training outcomes about their mean.
  double total_ss = 0.0;
  std::optional<double> linear_cv_sse;
  std::vector<CellResult> cells;
};

/// The per-location model collection plus training metadata.
struct ModelSet {
  Schema base_schema;
  Schema model_schema;
  double outcome_cap = 0.0;
  std::map<int, BoostedModel> models;
  std::vector<LocationModelInfo> info;  // one entry per location, modeled or not
  std::string content_hash;             // set by save/load

  bool is_modeled(int location_id) const { return models.count(location_id) > 0; }
  const BoostedModel& model(int location_id) const;
  std::vector<int> modeled_locations() const;

  /// Prediction for base-schema covariates placed at `location`, clamped at 0.
  double predict_at(const CovariateVector& base, const Location& location) const;
};

struct TrainingOptions {
  TuningGrid grid;
  std::size_t min_rows = 50;
  /// Outcomes are truncated to [0, quantile(cap_quantile)] before fitting; 1 disables the cap.
  double cap_quantile = 0.99;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  /// Also compute the one-hot linear regression CV error on the same folds.
  bool linear_baseline = false;
};

/// Tunes and fits one boosted model per location with at least `min_rows`
/// landings. Locations are independent tasks seeded from (seed, location
/// id), so the thread count never changes the result.
ModelSet fit_location_models(const Dataset& train, const TrainingOptions& options);

/// 1 - sum(CV SSE) / sum(within-location SS) across modeled locations.
double pooled_cv_r2(const ModelSet& models);
/// Same, for the linear baseline. Requires `linear_baseline` at training.
double pooled_linear_cv_r2(const ModelSet& models);

/// Linear-interpolated empirical quantile (type 7).
double empirical_quantile(std::vector<double> values, double q);

}  // namespace geomatch

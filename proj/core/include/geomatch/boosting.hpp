#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "geomatch/feature_matrix.hpp"
#include "geomatch/tree.hpp"

namespace geomatch {

struct BoostParams {
  int depth = 6;  // interpretation set by size_limit
  double learning_rate = 0.1;
  double bag_fraction = 0.5;
  int n_trees = 100;
  int min_node = 10;
  SizeLimit size_limit = SizeLimit::depth;

  void validate() const;
  TreeParams tree_params() const { return TreeParams{depth, min_node, size_limit}; }
  bool operator==(const BoostParams&) const = default;
};

/// Squared-error stochastic gradient boosting ensemble:
/// prediction = init_value + learning_rate * sum of tree outputs.
struct BoostedModel {
  double init_value = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  BoostParams params;
  int location_id = 0;
  Schema schema;
  std::string schema_fingerprint;
  /// Training RMSE after 0, 1, ..., n_trees iterations.
  std::vector<double> train_rmse;

  std::size_t n_trees() const noexcept { return trees.size(); }
  /// Unclamped ensemble output using the first `n_trees` trees (all by default).
  double raw(std::span<const double> x, std::size_t n_trees = SIZE_MAX) const;
};

BoostedModel fit_boosted(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params,
                         std::uint64_t seed);

/// Validates `x` against the model schema (SchemaError naming the feature)
/// and returns the ensemble output clamped below at 0.
double predict(const BoostedModel& model, const CovariateVector& x);

/// Relative influence: per-feature share (percent) of the squared-error
/// reduction summed over every split of every tree. Empty for a model
/// without splits.
std::map<std::string, double> variable_importance(const BoostedModel& model);

/// Seeded, unstratified fold labels in [0, folds): a shuffled round-robin.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

/// Incrementally extendable K-fold CV error curve for one parameter cell.
/// Extending from T to T' trees continues every fold's boosting run, so the
/// curve prefix is identical to a fresh run to T'.
class CvCurve {
 public:
  CvCurve(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params, std::span<const int> folds,
          int n_folds, std::uint64_t seed);
  ~CvCurve();
  CvCurve(CvCurve&&) noexcept;

  void extend_to(int n_trees);
  /// Held-out RMSE after 1..n iterations, pooled over folds.
  const std::vector<double>& rmse() const noexcept { return rmse_; }
  /// Held-out sum of squared errors after `n_trees` iterations (0 = fold means).
  double sse(int n_trees) const;
  int trees() const noexcept { return static_cast<int>(rmse_.size()); }

 private:
  struct Fold;
  std::vector<std::unique_ptr<Fold>> folds_;
  const FeatureMatrix* x_ = nullptr;
  std::span<const double> y_;
  double rate_ = 0.1;
  std::vector<double> sse_;  // index t = after t iterations
  std::vector<double> rmse_;
  std::size_t n_ = 0;
};

/// Fold-pooled held-out RMSE for iterations 1..params.n_trees.
std::vector<double> cross_validate(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params,
                                   int folds, std::uint64_t seed);

struct TuningGrid {
  std::vector<int> depths{5, 6, 7};
  std::vector<double> learning_rates{0.1, 0.01};
  std::vector<double> bag_fractions{0.5, 0.65, 0.8};
  int initial_max_trees = 1000;
  int extension_step = 500;
  int proximity_threshold = 100;
  int tree_ceiling = 10000;
  int folds = 10;
  int min_node = 10;
  SizeLimit size_limit = SizeLimit::depth;

  void validate() const;
  /// Depth-major enumeration of every (depth, rate, bag) cell.
  std::vector<BoostParams> cells() const;
};

struct CellResult {
  BoostParams params;  // n_trees = curve argmin
  double cv_rmse = 0.0;
  int max_trees = 0;   // final evaluated horizon
  int extensions = 0;
};

struct TuneResult {
  BoostParams best;
  double cv_rmse = 0.0;
  /// Held-out SSE of the chosen cell at the chosen tree count.
  double cv_sse = 0.0;
  std::vector<CellResult> cells;
  std::vector<int> folds;
};

/// Grid search with the tree-count extension rule: a cell's horizon grows by
/// `extension_step` while its argmin lies within `proximity_threshold` trees
/// of the horizon, up to `tree_ceiling`. The global winner minimizes CV RMSE;
/// ties go to fewer trees, then lower depth, then lower learning rate.
TuneResult tune(const FeatureMatrix& x, std::span<const double> y, const TuningGrid& grid, std::uint64_t seed);

}  // namespace geomatch

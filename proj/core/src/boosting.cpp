#include "geomatch/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geomatch/error.hpp"
#include "geomatch/random.hpp"

namespace geomatch {

void BoostParams::validate() const {
  if (depth < 1) throw ConfigError("interaction depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning rate must be in (0, 1]");
  if (!(bag_fraction > 0.0 && bag_fraction <= 1.0)) throw ConfigError("bag fraction must be in (0, 1]");
  if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
  if (min_node < 1) throw ConfigError("min_node must be >= 1");
}

double BoostedModel::raw(std::span<const double> x, std::size_t n) const {
  double sum = 0.0;
  const std::size_t count = std::min(n, trees.size());
  for (std::size_t t = 0; t < count; ++t) sum += trees[t].predict(x);
  return init_value + learning_rate * sum;
}

namespace {

/// One boosting run over a set of training rows of a shared matrix.
class BoostRun {
 public:
  BoostRun(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> train_rows,
           const BoostParams& params, std::uint64_t seed)
      : x_(x),
        y_(y),
        params_(params),
        train_(std::move(train_rows)),
        builder_(x, train_, params.tree_params()),
        rng_(seed),
        current_(x.rows(), 0.0),
        residual_(x.rows(), 0.0),
        permutation_(train_) {
    double sum = 0.0;
    for (auto r : train_) sum += y[r];
    init_ = train_.empty() ? 0.0 : sum / static_cast<double>(train_.size());
    for (auto r : train_) current_[r] = init_;
    bag_size_ = static_cast<std::size_t>(std::ceil(params.bag_fraction * static_cast<double>(train_.size())));
    bag_size_ = std::clamp<std::size_t>(bag_size_, train_.empty() ? 0 : 1, train_.size());
  }

  double init() const noexcept { return init_; }
  const std::vector<double>& current() const noexcept { return current_; }
  const std::vector<std::size_t>& train_rows() const noexcept { return train_; }

  RegressionTree step() {
    const std::size_t n = permutation_.size();
    for (std::size_t i = 0; i < bag_size_; ++i) {
      std::swap(permutation_[i], permutation_[i + rng_.index(n - i)]);
    }
    const std::span<const std::size_t> sample(permutation_.data(), bag_size_);
    for (auto r : sample) residual_[r] = y_[r] - current_[r];
    auto tree = builder_.fit(sample, residual_);
    for (auto r : train_) current_[r] += params_.learning_rate * tree.predict(x_, r);
    return tree;
  }

 private:
  const FeatureMatrix& x_;
  std::span<const double> y_;
  BoostParams params_;
  std::vector<std::size_t> train_;
  TreeBuilder builder_;
  Rng rng_;
  double init_ = 0.0;
  std::size_t bag_size_ = 0;
  std::vector<double> current_;
  std::vector<double> residual_;
  std::vector<std::size_t> permutation_;
};

double train_rmse(const BoostRun& run, std::span<const double> y) {
  double sse = 0.0;
  for (auto r : run.train_rows()) {
    const double d = y[r] - run.current()[r];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(run.train_rows().size()));
}

}  // namespace

BoostedModel fit_boosted(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params,
                         std::uint64_t seed) {
  params.validate();
  if (y.size() != x.rows()) throw ConfigError("fit_boosted: rows and outcomes differ in length");
  if (x.rows() == 0) throw ConfigError("fit_boosted: no training rows");
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  BoostRun run(x, y, rows, params, seed);

  BoostedModel model;
  model.init_value = run.init();
  model.learning_rate = params.learning_rate;
  model.params = params;
  model.schema = x.schema();
  model.schema_fingerprint = x.schema().fingerprint();
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  model.train_rmse.push_back(train_rmse(run, y));
  for (int t = 0; t < params.n_trees; ++t) {
    model.trees.push_back(run.step());
    model.train_rmse.push_back(train_rmse(run, y));
  }
  return model;
}

double predict(const BoostedModel& model, const CovariateVector& x) {
  validate(model.schema, x);
  return std::max(0.0, model.raw(x.values));
}

std::map<std::string, double> variable_importance(const BoostedModel& model) {
  std::vector<double> total(model.schema.size(), 0.0);
  double grand = 0.0;
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      total[static_cast<std::size_t>(node.feature)] += node.gain;
      grand += node.gain;
    }
  }
  std::map<std::string, double> out;
  if (grand <= 0.0) return out;
  for (std::size_t f = 0; f < total.size(); ++f) out[model.schema.feature(f).name] = 100.0 * total[f] / grand;
  return out;
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw ConfigError("cross-validation needs at least as many rows (" + std::to_string(n) + ") as folds (" +
                      std::to_string(folds) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return out;
}

struct CvCurve::Fold {
  Fold(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> train, std::vector<std::size_t> hold,
       const BoostParams& params, std::uint64_t seed)
      : run(x, y, std::move(train), params, seed), holdout(std::move(hold)), prediction(holdout.size(), run.init()) {}

  BoostRun run;
  std::vector<std::size_t> holdout;
  std::vector<double> prediction;
};

CvCurve::CvCurve(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params,
                 std::span<const int> folds, int n_folds, std::uint64_t seed)
    : n_(x.rows()) {
  params.validate();
  if (y.size() != x.rows() || folds.size() != x.rows()) throw ConfigError("cross-validation inputs differ in length");
  if (n_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n_ < static_cast<std::size_t>(n_folds)) throw ConfigError("cross-validation needs at least as many rows as folds");
  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train, hold;
    for (std::size_t r = 0; r < n_; ++r) (folds[r] == f ? hold : train).push_back(r);
    folds_.push_back(std::make_unique<Fold>(x, y, std::move(train), std::move(hold), params,
                                            derive_seed(seed, static_cast<std::uint64_t>(f))));
  }
  x_ = &x;
  y_ = y;
  rate_ = params.learning_rate;
  double sse = 0.0;
  for (const auto& fold : folds_) {
    for (std::size_t i = 0; i < fold->holdout.size(); ++i) {
      const double d = y[fold->holdout[i]] - fold->prediction[i];
      sse += d * d;
    }
  }
  sse_.push_back(sse);
}

CvCurve::~CvCurve() = default;
CvCurve::CvCurve(CvCurve&&) noexcept = default;

void CvCurve::extend_to(int n_trees) {
  while (trees() < n_trees) {
    double sse = 0.0;
    for (auto& fold : folds_) {
      const auto tree = fold->run.step();
      for (std::size_t i = 0; i < fold->holdout.size(); ++i) {
        const auto r = fold->holdout[i];
        fold->prediction[i] += rate_ * tree.predict(*x_, r);
        const double d = y_[r] - fold->prediction[i];
        sse += d * d;
      }
    }
    sse_.push_back(sse);
    rmse_.push_back(std::sqrt(sse / static_cast<double>(n_)));
  }
}

double CvCurve::sse(int n_trees) const { return sse_.at(static_cast<std::size_t>(n_trees)); }

std::vector<double> cross_validate(const FeatureMatrix& x, std::span<const double> y, const BoostParams& params,
                                   int folds, std::uint64_t seed) {
  const auto labels = fold_assignment(x.rows(), folds, derive_seed(seed, 1));
  CvCurve curve(x, y, params, labels, folds, derive_seed(seed, 2));
  curve.extend_to(params.n_trees);
  return curve.rmse();
}

void TuningGrid::validate() const {
  if (depths.empty() || learning_rates.empty() || bag_fractions.empty()) throw ConfigError("tuning grid has an empty axis");
  for (double b : bag_fractions) {
    if (!(b > 0.0 && b <= 1.0)) throw ConfigError("bag fractions must be in (0, 1]");
  }
  for (double r : learning_rates) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("learning rates must be in (0, 1]");
  }
  for (int d : depths) {
    if (d < 1) throw ConfigError("interaction depths must be >= 1");
  }
  if (initial_max_trees < 1) throw ConfigError("initial_max_trees must be >= 1");
  if (extension_step < 1) throw ConfigError("extension_step must be >= 1");
  if (proximity_threshold < 0) throw ConfigError("proximity_threshold must be >= 0");
  if (tree_ceiling < 1) throw ConfigError("tree_ceiling must be >= 1");
}

std::vector<BoostParams> TuningGrid::cells() const {
  std::vector<BoostParams> out;
  for (int d : depths) {
    for (double r : learning_rates) {
      for (double b : bag_fractions) out.push_back(BoostParams{d, r, b, 0, min_node, size_limit});
    }
  }
  return out;
}

TuneResult tune(const FeatureMatrix& x, std::span<const double> y, const TuningGrid& grid, std::uint64_t seed) {
  grid.validate();
  TuneResult result;
  result.folds = fold_assignment(x.rows(), grid.folds, derive_seed(seed, 1));
  const auto cells = grid.cells();
  std::vector<double> cell_sse;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CvCurve curve(x, y, cells[c], result.folds, grid.folds, derive_seed(seed, 2, c));
    int horizon = std::min(grid.initial_max_trees, grid.tree_ceiling);
    curve.extend_to(horizon);
    CellResult cell;
    cell.params = cells[c];
    while (true) {
      const auto& rmse = curve.rmse();
      const auto best = std::min_element(rmse.begin(), rmse.end());
      cell.params.n_trees = static_cast<int>(best - rmse.begin()) + 1;
      cell.cv_rmse = *best;
      if (horizon - cell.params.n_trees > grid.proximity_threshold || horizon >= grid.tree_ceiling) break;
      horizon = std::min(horizon + grid.extension_step, grid.tree_ceiling);
      curve.extend_to(horizon);
      ++cell.extensions;
    }
    cell.max_trees = horizon;
    cell_sse.push_back(curve.sse(cell.params.n_trees));
    result.cells.push_back(cell);
  }

  auto better = [](const CellResult& a, const CellResult& b) {
    if (a.cv_rmse != b.cv_rmse) return a.cv_rmse < b.cv_rmse;
    if (a.params.n_trees != b.params.n_trees) return a.params.n_trees < b.params.n_trees;
    if (a.params.depth != b.params.depth) return a.params.depth < b.params.depth;
    if (a.params.learning_rate != b.params.learning_rate) return a.params.learning_rate < b.params.learning_rate;
    return a.params.bag_fraction < b.params.bag_fraction;
  };
  std::size_t winner = 0;
  for (std::size_t c = 1; c < result.cells.size(); ++c) {
    if (better(result.cells[c], result.cells[winner])) winner = c;
  }
  result.best = result.cells[winner].params;
  result.cv_rmse = result.cells[winner].cv_rmse;
  result.cv_sse = cell_sse[winner];
  return result;
}

}  // namespace geomatch

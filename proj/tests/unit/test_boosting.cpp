#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "geomatch/boosting.hpp"
#include "geomatch/error.hpp"
#include "geomatch/model_io.hpp"
#include "geomatch/random.hpp"

using namespace geomatch;

namespace {

struct Toy {
  FeatureMatrix x;
  std::vector<double> y;
};

// y = 10*sin(3a) + 5*[c == 1] + noise, with optional pure-noise column.
Toy toy(std::size_t n, std::uint64_t seed, double noise = 1.0, bool noise_feature = false) {
  std::vector<FeatureSpec> specs{FeatureSpec{"a", FeatureKind::numeric, {}, ""},
                                 FeatureSpec{"c", FeatureKind::categorical, {"p", "q", "r"}, {}}};
  if (noise_feature) specs.push_back(FeatureSpec{"junk", FeatureKind::numeric, {}, ""});
  Schema s(specs);
  Rng rng(seed);
  Toy t{FeatureMatrix(s, n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform() * 2;
    const auto c = static_cast<double>(rng.index(3));
    t.x.set(i, 0, a);
    t.x.set(i, 1, c);
    if (noise_feature) t.x.set(i, 2, rng.uniform());
    t.y[i] = 10 * std::sin(3 * a) + (c == 1 ? 5 : 0) + noise * rng.normal() + 20;
  }
  return t;
}

}  // namespace

TEST(Boosting, ZeroTreesPredictsTrainingMean) {
  const auto t = toy(100, 1);
  BoostParams p;
  p.n_trees = 0;
  const auto m = fit_boosted(t.x, t.y, p, 3);
  double mean = 0;
  for (double v : t.y) mean += v;
  mean /= 100;
  EXPECT_NEAR(m.init_value, mean, 1e-12);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(predict(m, t.x.row(i)), mean, 1e-12);
}

TEST(Boosting, TrainingRmseNonIncreasingWithoutBagging) {
  const auto t = toy(300, 2);
  BoostParams p;
  p.n_trees = 80;
  p.bag_fraction = 1.0;
  p.depth = 3;
  const auto m = fit_boosted(t.x, t.y, p, 3);
  ASSERT_EQ(m.train_rmse.size(), 81u);
  for (std::size_t i = 1; i < m.train_rmse.size(); ++i) EXPECT_LE(m.train_rmse[i], m.train_rmse[i - 1] + 1e-9);
}

TEST(Boosting, SameSeedBitIdentical) {
  const auto t = toy(300, 3);
  BoostParams p;
  p.n_trees = 40;
  const auto a = fit_boosted(t.x, t.y, p, 99);
  const auto b = fit_boosted(t.x, t.y, p, 99);
  EXPECT_EQ(model_to_json(a), model_to_json(b));
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(predict(a, t.x.row(i)), predict(b, t.x.row(i)));
}

TEST(Boosting, PredictionIsInitPlusScaledTreeSum) {
  const auto t = toy(200, 4);
  BoostParams p;
  p.n_trees = 25;
  p.learning_rate = 0.05;
  const auto m = fit_boosted(t.x, t.y, p, 5);
  ASSERT_EQ(m.n_trees(), 25u);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto row = t.x.row(i);
    double sum = 0;
    for (const auto& tree : m.trees) sum += tree.predict(row.values);
    EXPECT_NEAR(m.raw(row.values), m.init_value + 0.05 * sum, 1e-9);
  }
}

TEST(Boosting, BinarySplitModelRecoversLevels) {
  Schema s({FeatureSpec{"flag", FeatureKind::categorical, {"no", "yes"}, {}}});
  FeatureMatrix x(s, 40);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x.set(i, 0, i % 2);
    y[i] = i % 2 ? 10.0 : 0.0;
  }
  BoostParams p;
  p.n_trees = 400;
  p.learning_rate = 0.1;
  p.bag_fraction = 1.0;
  p.depth = 1;
  const auto m = fit_boosted(x, y, p, 1);
  EXPECT_NEAR(predict(m, CovariateVector{{0.0}}), 0.0, 1e-9);
  EXPECT_NEAR(predict(m, CovariateVector{{1.0}}), 10.0, 1e-9);
}

TEST(Boosting, NegativePredictionsClampAtZero) {
  Schema s({FeatureSpec{"flag", FeatureKind::categorical, {"no", "yes"}, {}}});
  FeatureMatrix x(s, 40);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x.set(i, 0, i % 2);
    y[i] = i % 2 ? 10.0 : -10.0;
  }
  BoostParams p;
  p.n_trees = 100;
  p.bag_fraction = 1.0;
  const auto m = fit_boosted(x, y, p, 1);
  EXPECT_LT(m.raw(std::vector<double>{0.0}), 0.0);
  EXPECT_EQ(predict(m, CovariateVector{{0.0}}), 0.0);
}

TEST(Boosting, SchemaMismatchNamesFeature) {
  const auto t = toy(100, 5);
  BoostParams p;
  p.n_trees = 5;
  const auto m = fit_boosted(t.x, t.y, p, 1);
  try {
    predict(m, CovariateVector{{0.5, 7.0}});
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("c"), std::string::npos);
  }
  EXPECT_THROW(predict(m, CovariateVector{{0.5}}), SchemaError);
}

TEST(Boosting, MissingLevelNeverFails) {
  const auto t = toy(200, 6);
  BoostParams p;
  p.n_trees = 20;
  const auto m = fit_boosted(t.x, t.y, p, 1);
  const double missing = m.schema.missing_code(1);
  EXPECT_TRUE(std::isfinite(predict(m, CovariateVector{{1.0, missing}})));
}

TEST(Boosting, ImportanceSumsToHundredAndRanksNoiseLast) {
  const auto t = toy(600, 7, 1.0, true);
  BoostParams p;
  p.n_trees = 100;
  p.depth = 3;
  const auto m = fit_boosted(t.x, t.y, p, 2);
  const auto imp = variable_importance(m);
  double total = 0;
  for (const auto& [name, v] : imp) total += v;
  EXPECT_NEAR(total, 100.0, 1e-9);
  EXPECT_LT(imp.at("junk"), imp.at("a"));
  EXPECT_LT(imp.at("junk"), imp.at("c"));
}

TEST(Boosting, SingleFeatureImportanceIsHundred) {
  Schema s({FeatureSpec{"x", FeatureKind::numeric, {}, ""}});
  FeatureMatrix x(s, 100);
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x.set(i, 0, static_cast<double>(i));
    y[i] = i > 50 ? 3.0 : 1.0;
  }
  BoostParams p;
  p.n_trees = 10;
  const auto imp = variable_importance(fit_boosted(x, y, p, 1));
  EXPECT_NEAR(imp.at("x"), 100.0, 1e-12);
}

TEST(Boosting, SplitlessModelHasEmptyImportance) {
  const auto t = toy(50, 8);
  BoostParams p;
  p.n_trees = 0;
  EXPECT_TRUE(variable_importance(fit_boosted(t.x, t.y, p, 1)).empty());
}

TEST(Boosting, ModelJsonRoundTrip) {
  const auto t = toy(200, 9);
  BoostParams p;
  p.n_trees = 15;
  const auto m = fit_boosted(t.x, t.y, p, 4);
  const auto back = model_from_json(model_to_json(m));
  EXPECT_EQ(model_to_json(back), model_to_json(m));
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(predict(back, t.x.row(i)), predict(m, t.x.row(i)));
}

TEST(Folds, PartitionCoversRows) {
  const auto f = fold_assignment(4, 2, 1);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(std::count(f.begin(), f.end(), 0), 2);
  EXPECT_EQ(std::count(f.begin(), f.end(), 1), 2);
  const auto g = fold_assignment(103, 10, 5);
  for (int k = 0; k < 10; ++k) {
    const auto c = std::count(g.begin(), g.end(), k);
    EXPECT_TRUE(c == 10 || c == 11);
  }
}

TEST(Folds, TooFewRowsIsConfigError) {
  EXPECT_THROW(fold_assignment(3, 5, 1), ConfigError);
  EXPECT_THROW(fold_assignment(10, 1, 1), ConfigError);
}

TEST(CrossValidate, ConstantOutcomeHasZeroError) {
  auto t = toy(100, 10);
  std::fill(t.y.begin(), t.y.end(), 42.0);
  BoostParams p;
  p.n_trees = 20;
  const auto curve = cross_validate(t.x, t.y, p, 5, 1);
  ASSERT_EQ(curve.size(), 20u);
  for (double r : curve) EXPECT_NEAR(r, 0.0, 1e-9);
}

TEST(CrossValidate, OverfittingCurveTurnsUp) {
  const auto t = toy(150, 11, 6.0);
  BoostParams p;
  p.n_trees = 400;
  p.depth = 7;
  p.learning_rate = 0.1;
  p.min_node = 3;
  const auto curve = cross_validate(t.x, t.y, p, 5, 2);
  const auto argmin = std::min_element(curve.begin(), curve.end()) - curve.begin();
  EXPECT_LT(argmin + 1, 400);
  EXPECT_GT(curve.back(), curve[static_cast<std::size_t>(argmin)]);
}

TEST(CrossValidate, ExtendedCurveMatchesFreshCurve) {
  const auto t = toy(200, 12);
  BoostParams p;
  p.n_trees = 50;
  const auto folds = fold_assignment(200, 4, 3);
  CvCurve grown(t.x, t.y, p, folds, 4, 8);
  grown.extend_to(20);
  grown.extend_to(50);
  CvCurve fresh(t.x, t.y, p, folds, 4, 8);
  fresh.extend_to(50);
  EXPECT_EQ(grown.rmse(), fresh.rmse());
}

TEST(Tune, PaperGridHasEighteenCells) {
  const TuningGrid g;
  const auto cells = g.cells();
  EXPECT_EQ(cells.size(), 18u);
  std::set<std::tuple<int, double, double>> unique;
  for (const auto& c : cells) unique.emplace(c.depth, c.learning_rate, c.bag_fraction);
  EXPECT_EQ(unique.size(), 18u);
  for (const auto& [d, r, b] : unique) {
    EXPECT_TRUE(d >= 5 && d <= 7);
    EXPECT_TRUE(r == 0.1 || r == 0.01);
    EXPECT_TRUE(b == 0.5 || b == 0.65 || b == 0.8);
  }
}

TEST(Tune, SingleCellReturnsCurveArgmin) {
  const auto t = toy(200, 13, 3.0);
  TuningGrid g = geomatch::fixtures::quick_grid();
  g.initial_max_trees = 300;
  g.proximity_threshold = 0;
  const auto r = tune(t.x, t.y, g, 4);
  ASSERT_EQ(r.cells.size(), 1u);
  BoostParams p = g.cells().front();
  p.n_trees = r.cells.front().max_trees;
  // Same fold labels and per-cell seed as the tuner.
  const auto labels = fold_assignment(t.x.rows(), g.folds, derive_seed(4, 1));
  CvCurve cv(t.x, t.y, p, labels, g.folds, derive_seed(4, 2, 0));
  cv.extend_to(p.n_trees);
  const auto& curve = cv.rmse();
  const auto argmin = std::min_element(curve.begin(), curve.end()) - curve.begin();
  EXPECT_EQ(r.best.n_trees, argmin + 1);
  EXPECT_DOUBLE_EQ(r.cv_rmse, curve[static_cast<std::size_t>(argmin)]);
}

TEST(Tune, SlowLearnerTriggersExtension) {
  const auto t = toy(200, 14, 0.5);
  TuningGrid g = geomatch::fixtures::quick_grid();
  g.learning_rates = {0.001};
  g.initial_max_trees = 50;
  g.extension_step = 50;
  g.proximity_threshold = 10;
  g.tree_ceiling = 400;
  const auto r = tune(t.x, t.y, g, 4);
  EXPECT_GE(r.cells.front().extensions, 1);
  EXPECT_GT(r.cells.front().max_trees, 50);
  EXPECT_LE(r.cells.front().max_trees, 400);
}

TEST(Tune, TieBreakPrefersFewerTreesThenShallower) {
  auto t = toy(60, 15);
  std::fill(t.y.begin(), t.y.end(), 1.0);
  TuningGrid g = geomatch::fixtures::quick_grid();
  g.depths = {4, 2};
  g.learning_rates = {0.1, 0.05};
  g.initial_max_trees = 10;
  g.proximity_threshold = 0;
  const auto r = tune(t.x, t.y, g, 1);
  EXPECT_EQ(r.best.n_trees, 1);
  EXPECT_EQ(r.best.depth, 2);
  EXPECT_EQ(r.best.learning_rate, 0.05);
}

#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "geomatch/error.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/model_io.hpp"
#include "geomatch/random.hpp"

using namespace geomatch;

namespace {

// Three locations: 1 and 2 well populated, 3 with only five landings.
Dataset three_locations(std::uint64_t seed) {
  Dataset d;
  d.schema = Schema({FeatureSpec{"age", FeatureKind::numeric, {}, "years"},
                     FeatureSpec{"education", FeatureKind::categorical, {"low", "high"}, {}}});
  d.locations = {Location{1, "one", 2e6, 0.05, 12000, 0.02}, Location{2, "two", 3e5, 0.07, 9000, 0.01},
                 Location{3, "three", 5e4, 0.09, 7000, 0.0}};
  Rng rng(seed);
  std::int64_t id = 1;
  auto add = [&](int landing, int count) {
    for (int i = 0; i < count; ++i) {
      ImmigrantRecord r;
      r.id = id++;
      const double age = 20 + 40 * rng.uniform();
      const double edu = static_cast<double>(rng.index(2));
      r.covariates.values = {age, edu};
      r.landing = landing;
      r.outcome = std::max(0.0, 20000 + 400 * age + 15000 * edu + 3000 * landing + 4000 * rng.normal());
      d.records.push_back(r);
    }
  };
  add(1, 150);
  add(2, 120);
  add(3, 5);
  return d;
}

TrainingOptions quick_options(unsigned threads) {
  TrainingOptions o;
  o.grid = geomatch::fixtures::quick_grid();
  o.seed = 17;
  o.threads = threads;
  return o;
}

}  // namespace

TEST(LocationModels, SparseLocationIsUnmodeled) {
  const auto d = three_locations(1);
  const auto ms = fit_location_models(d, quick_options(1));
  EXPECT_EQ(ms.modeled_locations(), (std::vector<int>{1, 2}));
  ASSERT_EQ(ms.info.size(), 3u);
  EXPECT_FALSE(ms.info[2].modeled);
  EXPECT_EQ(ms.info[2].sample_count, 5u);
  EXPECT_FALSE(ms.is_modeled(3));
  EXPECT_THROW(ms.model(3), SchemaError);
}

TEST(LocationModels, NoEligibleLocationIsConfigError) {
  auto d = three_locations(2);
  auto o = quick_options(1);
  o.min_rows = 1000;
  EXPECT_THROW(fit_location_models(d, o), ConfigError);
}

TEST(LocationModels, ThreadCountDoesNotChangeModels) {
  const auto d = three_locations(3);
  const auto serial = fit_location_models(d, quick_options(1));
  const auto parallel = fit_location_models(d, quick_options(3));
  for (int id : serial.modeled_locations()) {
    EXPECT_EQ(model_to_json(serial.model(id)), model_to_json(parallel.model(id)));
  }
}

TEST(LocationModels, LocationAttributesSubstituted) {
  const auto d = three_locations(4);
  const auto ms = fit_location_models(d, quick_options(1));
  const auto x = d.records.front().covariates;
  const auto full = with_location(x, d.locations[1]);
  EXPECT_EQ(full.values.size(), x.values.size() + location_feature_specs().size());
  EXPECT_EQ(ms.predict_at(x, d.locations[1]), predict(ms.model(2), full));
}

TEST(LocationModels, PooledR2IsOneMinusSseOverSs) {
  const auto d = three_locations(5);
  auto o = quick_options(1);
  o.linear_baseline = true;
  const auto ms = fit_location_models(d, o);
  double sse = 0, ss = 0, lin = 0;
  for (const auto& m : ms.info) {
    if (!m.modeled) continue;
    sse += m.cv_sse;
    ss += m.total_ss;
    lin += *m.linear_cv_sse;
  }
  EXPECT_NEAR(pooled_cv_r2(ms), 1 - sse / ss, 1e-12);
  EXPECT_NEAR(pooled_linear_cv_r2(ms), 1 - lin / ss, 1e-12);
  EXPECT_GT(pooled_cv_r2(ms), 0.3);
}

TEST(LocationModels, LinearR2NeedsBaseline) {
  const auto ms = fit_location_models(three_locations(6), quick_options(1));
  EXPECT_THROW(pooled_linear_cv_r2(ms), ConfigError);
}

TEST(LocationModels, OutcomeCapIsTrainingQuantile) {
  const auto d = three_locations(7);
  const auto ms = fit_location_models(d, quick_options(1));
  EXPECT_NEAR(ms.outcome_cap, empirical_quantile(d.outcomes(), 0.99), 1e-9);
}

TEST(EmpiricalQuantile, Type7Interpolation) {
  EXPECT_DOUBLE_EQ(empirical_quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({0, 10}, 0.25), 2.5);
}

TEST(ModelSetIo, SaveLoadPreservesPredictionsAndHash) {
  const auto d = three_locations(8);
  auto ms = fit_location_models(d, quick_options(1));
  const auto dir = geomatch::fixtures::scratch_dir("modelset");
  save_modelset(dir, ms);
  EXPECT_FALSE(ms.content_hash.empty());
  const auto back = load_modelset(dir);
  EXPECT_EQ(back.content_hash, ms.content_hash);
  EXPECT_EQ(back.modeled_locations(), ms.modeled_locations());
  EXPECT_EQ(back.outcome_cap, ms.outcome_cap);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& x = d.records[i].covariates;
    for (const auto& loc : d.locations) {
      if (ms.is_modeled(loc.id)) EXPECT_EQ(back.predict_at(x, loc), ms.predict_at(x, loc));
    }
  }
  write_tuning_report(dir / "tuning.csv", back);
  write_importance(dir / "importance.csv", back);
  EXPECT_GT(std::filesystem::file_size(dir / "tuning.csv"), 0u);
}

TEST(ModelSetIo, EditedModelFileChangesHash) {
  auto ms = fit_location_models(three_locations(9), quick_options(1));
  const auto dir = geomatch::fixtures::scratch_dir("modelset-tamper");
  save_modelset(dir, ms);
  const auto before = load_modelset(dir).content_hash;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().filename() != "modelset.json") {
      std::ofstream(entry.path(), std::ios::app) << " ";
      break;
    }
  }
  EXPECT_NE(load_modelset(dir).content_hash, before);
}

TEST(ModelSetIo, MissingDirectoryIsArtifactError) {
  EXPECT_THROW(load_modelset("/nonexistent/geomatch-models"), ArtifactError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "fixtures.hpp"
#include "geomatch/dataset.hpp"
#include "geomatch/error.hpp"
#include "geomatch/synthetic.hpp"

using namespace geomatch;

namespace {

Schema tiny_schema() {
  return Schema({FeatureSpec{"age", FeatureKind::numeric, {}, "years"},
                 FeatureSpec{"education", FeatureKind::categorical, {"secondary", "bachelor"}, {}}});
}

std::filesystem::path write(const std::filesystem::path& dir, const std::string& text) {
  const auto path = dir / "data.csv";
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(LoadDataset, ThreeRows) {
  const auto dir = fixtures::scratch_dir("load3");
  const auto path = write(dir, "age,education,landing,outcome\n30,bachelor,1,50000\n41,secondary,2,42000\n25,,1,0\n");
  const auto res = load_dataset(path, tiny_schema());
  ASSERT_EQ(res.dataset.records.size(), 3u);
  EXPECT_EQ(res.unknown_levels, 0u);
  EXPECT_EQ(res.dataset.records[1].landing, 2);
  EXPECT_EQ(res.dataset.records[0].covariates.values[1], 1.0);
  EXPECT_EQ(res.dataset.records[2].covariates.values[1], tiny_schema().missing_code(1));
}

TEST(LoadDataset, MissingLandingColumnNamesIt) {
  const auto dir = fixtures::scratch_dir("nolanding");
  const auto path = write(dir, "age,education,outcome\n30,bachelor,50000\n");
  try {
    load_dataset(path, tiny_schema());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("landing"), std::string::npos);
  }
}

TEST(LoadDataset, UnknownLevelMapsToMissingWithWarning) {
  const auto dir = fixtures::scratch_dir("unknown");
  const auto path = write(dir, "age,education,landing,outcome\n30,phd,1,50000\n");
  const auto res = load_dataset(path, tiny_schema());
  ASSERT_EQ(res.dataset.records.size(), 1u);
  EXPECT_EQ(res.unknown_levels, 1u);
  EXPECT_EQ(res.dataset.records[0].covariates.values[1], tiny_schema().missing_code(1));
}

TEST(LoadDataset, NonNumericTokenReportsRow) {
  const auto dir = fixtures::scratch_dir("parse");
  const auto path = write(dir, "age,education,landing,outcome\n30,bachelor,1,50000\nabc,bachelor,1,1\n");
  try {
    load_dataset(path, tiny_schema());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("age"), std::string::npos);
  }
}

TEST(LoadDataset, RoundTripIsExact) {
  SyntheticConfig cfg;
  cfg.n = 300;
  cfg.k = 5;
  cfg.seed = 4;
  const auto [data, truth] = generate_synthetic(cfg);
  const auto dir = fixtures::scratch_dir("roundtrip");
  write_dataset(dir / "d.csv", data);
  write_locations(dir / "l.csv", data.locations);
  write_schema(dir / "s.json", data.schema);
  const auto schema = load_schema(dir / "s.json");
  const auto locations = load_locations(dir / "l.csv");
  EXPECT_EQ(schema, data.schema);
  EXPECT_EQ(locations, data.locations);
  const auto back = load_dataset(dir / "d.csv", schema, locations);
  EXPECT_EQ(back.unknown_levels, 0u);
  ASSERT_EQ(back.dataset.records.size(), data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) EXPECT_EQ(back.dataset.records[i], data.records[i]);
}

TEST(DatasetValidate, SpouseOutcomeNeedsTwoAdults) {
  SyntheticConfig cfg;
  cfg.n = 50;
  cfg.k = 3;
  auto [data, truth] = generate_synthetic(cfg);
  for (auto& r : data.records) {
    if (r.case_size == 1) {
      r.spouse_outcome = 1000.0;
      break;
    }
  }
  EXPECT_THROW(data.validate(), Error);
}

TEST(QuantileRanks, DistinctOutcomes) {
  const std::vector<double> y{10, 20, 30};
  const auto q = income_quantile_ranks(y);
  EXPECT_DOUBLE_EQ(q[0], 1.0 / 6);
  EXPECT_DOUBLE_EQ(q[1], 3.0 / 6);
  EXPECT_DOUBLE_EQ(q[2], 5.0 / 6);
}

TEST(QuantileRanks, AllEqual) {
  const std::vector<double> y(5, 7.0);
  for (double q : income_quantile_ranks(y)) EXPECT_DOUBLE_EQ(q, 0.5);
}

TEST(QuantileRanks, AveragedTies) {
  // Oracle: ranks 1,2 tie -> 1.5; (1.5-0.5)/4 = 0.25, (3-0.5)/4, (4-0.5)/4.
  const std::vector<double> y{5, 5, 10, 20};
  const auto q = income_quantile_ranks(y);
  EXPECT_DOUBLE_EQ(q[0], 0.25);
  EXPECT_DOUBLE_EQ(q[1], 0.25);
  EXPECT_DOUBLE_EQ(q[2], 0.625);
  EXPECT_DOUBLE_EQ(q[3], 0.875);
}

TEST(QuantileRanks, MonotoneAndOrderInvariant) {
  Rng rng(8);
  std::vector<double> y(400);
  for (auto& v : y) v = std::floor(rng.uniform() * 50);
  const auto q = income_quantile_ranks(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] < y[j]) EXPECT_LT(q[i], q[j]);
      if (y[i] == y[j]) EXPECT_EQ(q[i], q[j]);
    }
  }
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  std::vector<double> shuffled;
  for (auto p : perm) shuffled.push_back(y[p]);
  const auto q2 = income_quantile_ranks(shuffled);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(q2[i], q[perm[i]]);
}

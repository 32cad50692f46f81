#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "geomatch/synthetic.hpp"

using namespace geomatch;

namespace {

std::pair<Dataset, SyntheticGroundTruth> world(SelectionMode mode, std::size_t n = 4000, std::uint64_t seed = 3) {
  SyntheticConfig cfg;
  cfg.n = n;
  cfg.k = 8;
  cfg.selection = mode;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

// Mean of V at the chosen location minus mean of V at the unchosen ones.
double chosen_v_gap(const Dataset& d, const SyntheticGroundTruth& t) {
  CompensatedSum chosen, other;
  std::size_t n_other = 0;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& v = t.entries[i].v;
    for (std::size_t a = 0; a < v.size(); ++a) {
      if (static_cast<int>(a) + 1 == d.records[i].landing) {
        chosen.add(v[a]);
      } else {
        other.add(v[a]);
        ++n_other;
      }
    }
  }
  return chosen.value() / static_cast<double>(d.records.size()) - other.value() / static_cast<double>(n_other);
}

}  // namespace

TEST(Synthetic, Deterministic) {
  SyntheticConfig cfg;
  cfg.n = 100;
  cfg.k = 5;
  cfg.seed = 7;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  EXPECT_EQ(a.first.records, b.first.records);
  EXPECT_EQ(a.first.locations, b.first.locations);
  EXPECT_EQ(a.second.entries, b.second.entries);
}

TEST(Synthetic, ObservedOutcomeIsPotentialOutcomeAtLanding) {
  for (auto mode : {SelectionMode::observables_only, SelectionMode::u_confounded, SelectionMode::v_confounded}) {
    const auto [d, t] = world(mode, 1000);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      const auto& e = t.for_record(d.records[i].id);
      EXPECT_EQ(d.records[i].outcome, e.potential_outcomes[static_cast<std::size_t>(d.records[i].landing - 1)]);
      for (double y : e.potential_outcomes) EXPECT_GE(y, 0.0);
    }
  }
}

TEST(Synthetic, DatasetValidates) {
  const auto [d, t] = world(SelectionMode::observables_only, 500);
  EXPECT_NO_THROW(d.validate());
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig cfg;
  cfg.n = 0;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
  cfg.n = 10;
  cfg.k = 1;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synthetic, VConfoundedChoosersHaveHigherV) {
  const auto [d, t] = world(SelectionMode::v_confounded);
  const double gap = chosen_v_gap(d, t);
  // V enters utility with unit weight against unit-scale Gumbel noise, so the
  // chosen location's V sits well above the rest.
  EXPECT_GT(gap, 0.3);
  const auto [d0, t0] = world(SelectionMode::observables_only);
  EXPECT_LT(std::fabs(chosen_v_gap(d0, t0)), 0.08);
}

TEST(Synthetic, UConfoundedHighUPicksLargeLocations) {
  const auto [d, t] = world(SelectionMode::u_confounded, 6000);
  CompensatedSum large, small;
  std::size_t nl = 0, ns = 0;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    if (d.records[i].landing <= 2) {
      large.add(t.entries[i].u);
      ++nl;
    } else if (d.records[i].landing >= 7) {
      small.add(t.entries[i].u);
      ++ns;
    }
  }
  EXPECT_GT(large.value() / static_cast<double>(nl), small.value() / static_cast<double>(ns));
}

TEST(Synthetic, ZeroVScaleMakesVConstant) {
  SyntheticConfig cfg;
  cfg.n = 50;
  cfg.k = 4;
  cfg.v_scale = 0.0;
  const auto [d, t] = generate_synthetic(cfg);
  for (const auto& e : t.entries) {
    for (double v : e.v) EXPECT_EQ(v, 0.0);
  }
}

TEST(Synthetic, FourLargeLocationsAtDefaultK) {
  const auto locs = synthetic_locations(20, 1);
  int large = 0;
  for (const auto& l : locs) large += l.population > 1.5e6 ? 1 : 0;
  EXPECT_EQ(large, 4);
}

TEST(Synthetic, GroundTruthRoundTrip) {
  const auto [d, t] = world(SelectionMode::observables_only, 100);
  const auto dir = fixtures::scratch_dir("truth");
  write_ground_truth(dir / "t.json", t);
  const auto back = load_ground_truth(dir / "t.json");
  EXPECT_EQ(back.entries, t.entries);
}

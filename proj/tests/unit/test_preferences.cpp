#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "geomatch/error.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/random.hpp"

using namespace geomatch;

namespace {

Dataset choice_data(int k, std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.schema = Schema({FeatureSpec{"age", FeatureKind::numeric, {}, "years"},
                     FeatureSpec{"education", FeatureKind::categorical, {"low", "mid", "high"}, {}}});
  for (int a = 1; a <= k; ++a) d.locations.push_back(Location{a, "L" + std::to_string(a), 1e5 * a, 0.05, 8000, 0.01});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ImmigrantRecord r;
    r.id = static_cast<std::int64_t>(i + 1);
    const double age = 20 + 40 * rng.uniform();
    const auto edu = static_cast<double>(rng.index(3));
    r.covariates.values = {age, edu};
    std::vector<double> u(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) u[static_cast<std::size_t>(a)] = 0.3 * a + 0.03 * a * (age - 40) - 0.4 * a * edu + rng.gumbel();
    r.landing = static_cast<int>(std::max_element(u.begin(), u.end()) - u.begin()) + 1;
    r.outcome = 30000;
    d.records.push_back(r);
  }
  return d;
}

// Dense Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

// Penalized binary logistic regression by Newton's method on the model's own encoding.
std::vector<double> newton_logistic(const MultinomialLogitModel& enc, const Dataset& d, int positive, double l2) {
  const std::size_t w = enc.width();
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (const auto& r : d.records) {
    rows.push_back(enc.encode(r.covariates));
    y.push_back(r.landing == positive ? 1.0 : 0.0);
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> beta(w, 0.0);
  for (int it = 0; it < 100; ++it) {
    std::vector<double> g(w, 0.0);
    std::vector<std::vector<double>> h(w, std::vector<double>(w, 0.0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double eta = std::inner_product(rows[i].begin(), rows[i].end(), beta.begin(), 0.0);
      const double p = 1 / (1 + std::exp(-eta));
      for (std::size_t j = 0; j < w; ++j) {
        g[j] += (p - y[i]) * rows[i][j] / n;
        for (std::size_t k = 0; k < w; ++k) h[j][k] += p * (1 - p) * rows[i][j] * rows[i][k] / n;
      }
    }
    for (std::size_t j = 1; j < w; ++j) {
      g[j] += l2 * beta[j];
      h[j][j] += l2;
    }
    const auto step = solve(h, g);
    double m = 0;
    for (std::size_t j = 0; j < w; ++j) {
      beta[j] -= step[j];
      m = std::max(m, std::abs(step[j]));
    }
    if (m < 1e-13) break;
  }
  return beta;
}

}  // namespace

TEST(Mnl, InterceptOnlyRecoversLandingShares) {
  const auto d = choice_data(4, 2000, 1);
  const auto m = fit_mnl(d, std::vector<std::string>{}, MnlOptions{0.0, 500, 1e-10});
  std::map<int, double> share;
  for (const auto& r : d.records) share[r.landing] += 1.0 / 2000;
  const auto p = m.probabilities(d.records.front().covariates);
  for (std::size_t j = 0; j < m.locations().size(); ++j) EXPECT_NEAR(p[j], share[m.locations()[j]], 1e-6);
}

TEST(Mnl, TwoLocationsMatchNewtonLogistic) {
  const auto d = choice_data(2, 1500, 2);
  const double l2 = 0.01;
  const std::vector<std::string> features{"age", "education"};
  const auto m = fit_mnl(d, features, MnlOptions{l2, 2000, 1e-11});
  ASSERT_EQ(m.reference_location(), 1);
  const auto oracle = newton_logistic(m, d, 2, l2);
  ASSERT_EQ(m.coefficients().size(), oracle.size());
  for (std::size_t j = 0; j < oracle.size(); ++j) EXPECT_NEAR(m.coefficients()[j], oracle[j], 1e-6) << j;
}

TEST(Mnl, RidgeShrinksCoefficients) {
  const auto d = choice_data(3, 1500, 3);
  const std::vector<std::string> features{"age", "education"};
  const auto weak = fit_mnl(d, features, MnlOptions{1e-4, 500, 1e-8});
  const auto strong = fit_mnl(d, features, MnlOptions{1.0, 500, 1e-8});
  EXPECT_LT(strong.coefficient_norm2(), weak.coefficient_norm2());
  EXPECT_LE(weak.gradient_norm(), 1e-8);
}

TEST(Mnl, ProbabilitiesFormDistributionAndReferenceScoreIsZero) {
  const auto d = choice_data(5, 1000, 4);
  const auto m = fit_mnl(d, std::vector<std::string>{"age", "education"});
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& x = d.records[i].covariates;
    const auto p = m.probabilities(x);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double v : p) EXPECT_GT(v, 0.0);
    EXPECT_EQ(m.scores(x).front(), 0.0);
  }
}

TEST(Mnl, LocationWithoutLandingsIsExcluded) {
  auto d = choice_data(3, 600, 5);
  d.locations.push_back(Location{4, "empty", 1e4, 0.05, 6000, 0.0});
  const auto m = fit_mnl(d, std::vector<std::string>{"education"});
  EXPECT_EQ(m.locations().size(), 3u);
  EXPECT_EQ(m.excluded_locations(), std::vector<int>{4});
}

TEST(Mnl, UnknownFeatureIsSchemaError) {
  const auto d = choice_data(2, 100, 6);
  EXPECT_THROW(fit_mnl(d, std::vector<std::string>{"shoe_size"}), SchemaError);
}

TEST(Mnl, JsonRoundTripIsExact) {
  const auto d = choice_data(3, 800, 7);
  const auto m = fit_mnl(d, std::vector<std::string>{"age", "education"});
  const auto back = MultinomialLogitModel::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(back.probabilities(d.records[i].covariates), m.probabilities(d.records[i].covariates));
  }
}

TEST(RankByValue, DescendingOrder) {
  Rng rng(1);
  const std::vector<int> ids{1, 2, 3, 4};
  const std::vector<double> v{0.1, 0.4, 0.2, 0.3};
  const auto r = rank_by_value(ids, v, rng);
  EXPECT_EQ(r.locations, (std::vector<int>{2, 4, 3, 1}));
  EXPECT_EQ(r.values, (std::vector<double>{0.4, 0.3, 0.2, 0.1}));
}

TEST(RankByValue, InvariantUnderStrictlyIncreasingTransform) {
  Rng data(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> ids(8);
    std::iota(ids.begin(), ids.end(), 1);
    std::vector<double> v(8), t(8);
    for (std::size_t j = 0; j < 8; ++j) {
      v[j] = data.normal();
      t[j] = std::exp(3 * v[j]) + 7;
    }
    Rng a(trial), b(trial + 1000);
    EXPECT_EQ(rank_by_value(ids, v, a).locations, rank_by_value(ids, t, b).locations);
  }
}

TEST(RankByValue, ExactTiesAreUniform) {
  const std::vector<int> ids{1, 2, 3};
  const std::vector<double> v{0.5, 0.5, 0.5};
  std::map<std::vector<int>, int> counts;
  Rng rng(3);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[rank_by_value(ids, v, rng).locations];
  ASSERT_EQ(counts.size(), 6u);
  double chi2 = 0;
  const double expected = draws / 6.0;
  for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 20.52);  // chi-square(5) upper 0.1% point
}

TEST(RankByValue, TiesStayBetweenNeighbours) {
  const std::vector<int> ids{1, 2, 3, 4};
  const std::vector<double> v{0.9, 0.5, 0.5, 0.1};
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto r = rank_by_value(ids, v, rng);
    EXPECT_EQ(r.locations.front(), 1);
    EXPECT_EQ(r.locations.back(), 4);
  }
}

TEST(AcceptableSet, Examples) {
  const PreferenceRanking r{{3, 1, 4, 2}, {0.4, 0.3, 0.2, 0.1}};
  EXPECT_EQ(acceptable_set(r, 1).locations, std::vector<int>{3});
  EXPECT_EQ(acceptable_set(r, 2).locations, (std::vector<int>{3, 1}));
  EXPECT_EQ(acceptable_set(r, 10).locations, (std::vector<int>{3, 1, 4, 2}));
  EXPECT_TRUE(acceptable_set(r, 2).contains(1));
  EXPECT_FALSE(acceptable_set(r, 2).contains(4));
  EXPECT_THROW(acceptable_set(r, 0), ConfigError);
}

TEST(AcceptableSet, NestedInPhi) {
  const auto& p = geomatch::fixtures::small_pipeline();
  for (std::size_t i = 0; i < 50; ++i) {
    for (int phi = 1; phi < 8; ++phi) {
      const auto small = acceptable_set(p.rankings[i], phi);
      const auto big = acceptable_set(p.rankings[i], phi + 1);
      EXPECT_LE(small.size(), big.size());
      for (int a : small.locations) EXPECT_TRUE(big.contains(a));
    }
  }
}

TEST(RankLocations, ExclusionKeepsRelativeOrderAndRenormalizes) {
  const auto d = choice_data(5, 1500, 8);
  const auto m = fit_mnl(d, std::vector<std::string>{"age", "education"});
  const std::vector<int> excluded{2, 4};
  for (std::size_t i = 0; i < 30; ++i) {
    Rng a(i), b(i);
    const auto full = rank_locations(m, d.records[i].covariates, a);
    const auto cut = rank_locations(m, d.records[i].covariates, b, excluded);
    std::vector<int> expected;
    for (int loc : full.locations) {
      if (loc != 2 && loc != 4) expected.push_back(loc);
    }
    EXPECT_EQ(cut.locations, expected);
    EXPECT_NEAR(std::accumulate(cut.values.begin(), cut.values.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(RankDataset, SeededAndAlignedWithRecords) {
  const auto& p = geomatch::fixtures::small_pipeline();
  const auto again = rank_dataset(p.mnl, p.clients, 3);
  ASSERT_EQ(again.size(), p.clients.records.size());
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i].locations, p.rankings[i].locations);
}

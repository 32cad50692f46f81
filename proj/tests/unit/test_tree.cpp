#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "geomatch/random.hpp"
#include "geomatch/tree.hpp"

using namespace geomatch;

namespace {

Schema one_numeric() { return Schema({FeatureSpec{"x", FeatureKind::numeric, {}, ""}}); }

FeatureMatrix column(const Schema& s, const std::vector<double>& xs) {
  FeatureMatrix m(s, xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) m.set(i, 0, xs[i]);
  return m;
}

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

// Best single-split SSE reduction over every threshold, by exhaustive search.
struct BruteSplit {
  double gain = 0;
  double threshold = 0;
};

BruteSplit brute_numeric(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_node) {
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  BruteSplit best;
  const double total = sse(y);
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
    const double t = 0.5 * (distinct[k] + distinct[k + 1]);
    std::vector<double> l, r;
    for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= t ? l : r).push_back(y[i]);
    if (l.size() < min_node || r.size() < min_node) continue;
    const double g = total - sse(l) - sse(r);
    if (g > best.gain) best = {g, t};
  }
  return best;
}

}  // namespace

TEST(Tree, ConstantTargetsGiveSingleLeaf) {
  const auto s = one_numeric();
  const auto x = column(s, {1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<double> y(8, 5.0);
  const auto tree = fit_tree(x, y, TreeParams{6, 2});
  EXPECT_EQ(tree.nodes().size(), 1u);
  EXPECT_EQ(tree.predict(x, 0), 5.0);
}

TEST(Tree, BinaryFeatureSeparatesPerfectly) {
  Schema s({FeatureSpec{"flag", FeatureKind::categorical, {"no", "yes"}, {}}});
  FeatureMatrix x(s, 20);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x.set(i, 0, i < 10 ? 0 : 1);
    y[i] = i < 10 ? 0.0 : 10.0;
  }
  const auto tree = fit_tree(x, y, TreeParams{6, 2});
  EXPECT_EQ(tree.depth(), 1);
  EXPECT_EQ(tree.split_count(), 1u);
  EXPECT_EQ(tree.predict(std::vector<double>{0.0}), 0.0);
  EXPECT_EQ(tree.predict(std::vector<double>{1.0}), 10.0);
}

TEST(Tree, PiecewiseConstantMatchesBruteForce) {
  const auto s = one_numeric();
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(i * 0.5);
    ys.push_back(i < 13 ? 3.0 : 11.0);
  }
  const auto x = column(s, xs);
  const auto tree = fit_tree(x, ys, TreeParams{6, 2});
  const auto oracle = brute_numeric(xs, ys, 2);
  EXPECT_EQ(tree.nodes().front().threshold, oracle.threshold);
  EXPECT_NEAR(tree.nodes().front().gain, oracle.gain, 1e-9);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(tree.predict(x, i), ys[i], 1e-12);
}

TEST(Tree, RootSplitMatchesBruteForceOnRandomData) {
  Rng rng(17);
  Schema s({FeatureSpec{"a", FeatureKind::numeric, {}, ""}, FeatureSpec{"b", FeatureKind::numeric, {}, ""}});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + rng.index(40);
    FeatureMatrix x(s, n);
    std::vector<double> a(n), b(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::floor(rng.uniform() * 15);
      b[i] = rng.uniform();
      y[i] = (a[i] > 6 ? 4.0 : 0.0) + 3.0 * b[i] + rng.normal();
      x.set(i, 0, a[i]);
      x.set(i, 1, b[i]);
    }
    const auto oa = brute_numeric(a, y, 5), ob = brute_numeric(b, y, 5);
    const auto tree = fit_tree(x, y, TreeParams{1, 5});
    const auto& root = tree.nodes().front();
    const auto& best = oa.gain >= ob.gain ? oa : ob;
    EXPECT_EQ(root.feature, oa.gain >= ob.gain ? 0 : 1);
    EXPECT_DOUBLE_EQ(root.threshold, best.threshold);
    EXPECT_NEAR(root.gain, best.gain, 1e-8 * std::max(1.0, best.gain));
  }
}

TEST(Tree, CategoricalSplitMatchesBestSubset) {
  // Exhaustive search over every two-way partition of the observed levels.
  Rng rng(23);
  Schema s({FeatureSpec{"c", FeatureKind::categorical, {"a", "b", "c", "d"}, {}}});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 60;
    FeatureMatrix x(s, n);
    std::vector<double> y(n);
    std::vector<int> lv(n);
    const double shift[5] = {rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    for (std::size_t i = 0; i < n; ++i) {
      lv[i] = static_cast<int>(rng.index(5));
      x.set(i, 0, lv[i]);
      y[i] = 3.0 * shift[lv[i]] + rng.normal();
    }
    double best = 0;
    const double total = sse(y);
    for (unsigned mask = 1; mask < 31; ++mask) {
      std::vector<double> l, r;
      for (std::size_t i = 0; i < n; ++i) ((mask >> lv[i]) & 1 ? l : r).push_back(y[i]);
      if (l.size() < 3 || r.size() < 3) continue;
      best = std::max(best, total - sse(l) - sse(r));
    }
    const auto tree = fit_tree(x, y, TreeParams{1, 3});
    EXPECT_NEAR(tree.nodes().front().gain, best, 1e-8 * std::max(1.0, best));
  }
}

TEST(Tree, RespectsDepthAndMinNode) {
  Rng rng(4);
  const auto s = one_numeric();
  std::vector<double> xs(200), ys(200);
  for (std::size_t i = 0; i < 200; ++i) {
    xs[i] = rng.uniform();
    ys[i] = std::sin(12 * xs[i]) + 0.1 * rng.normal();
  }
  const auto x = column(s, xs);
  for (int depth : {1, 2, 3, 5}) {
    const auto tree = fit_tree(x, ys, TreeParams{depth, 7});
    EXPECT_LE(tree.depth(), depth);
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) EXPECT_GE(node.count, 7);
    }
  }
}

TEST(Tree, MaxSplitsLimitsInternalNodes) {
  Rng rng(6);
  const auto s = one_numeric();
  std::vector<double> xs(300), ys(300);
  for (std::size_t i = 0; i < 300; ++i) {
    xs[i] = rng.uniform();
    ys[i] = std::sin(20 * xs[i]);
  }
  const auto x = column(s, xs);
  const auto tree = fit_tree(x, ys, TreeParams{4, 5, SizeLimit::max_splits});
  EXPECT_EQ(tree.split_count(), 4u);
}

TEST(Tree, UnseenLevelFollowsMissing) {
  Schema s({FeatureSpec{"c", FeatureKind::categorical, {"a", "b", "c"}, {}}});
  // Levels a (0) and missing (3) observed; b and c never appear.
  FeatureMatrix x(s, 20);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x.set(i, 0, i < 10 ? 0 : 3);
    y[i] = i < 10 ? 1.0 : 9.0;
  }
  const auto tree = fit_tree(x, y, TreeParams{2, 2});
  EXPECT_EQ(tree.predict(std::vector<double>{1.0}), 9.0);
  EXPECT_EQ(tree.predict(std::vector<double>{2.0}), 9.0);
  EXPECT_EQ(tree.predict(std::vector<double>{0.0}), 1.0);
}

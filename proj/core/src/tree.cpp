#include "geomatch/tree.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <queue>

#include "geomatch/error.hpp"

namespace geomatch {

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ConfigError("a tree needs at least one node");
}

int RegressionTree::depth() const {
  std::vector<int> depth_of(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) continue;
    depth_of[static_cast<std::size_t>(n.left)] = depth_of[i] + 1;
    depth_of[static_cast<std::size_t>(n.right)] = depth_of[i] + 1;
    deepest = std::max(deepest, depth_of[i] + 1);
  }
  return deepest;
}

template <typename Get>
double RegressionTree::walk(Get&& get) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    const double v = get(static_cast<std::size_t>(node->feature));
    bool left;
    if (node->categorical) {
      left = (node->left_levels >> static_cast<unsigned>(v)) & 1ULL;
    } else {
      left = v <= node->threshold;
    }
    node = &nodes_[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  return node->value;
}

double RegressionTree::predict(std::span<const double> x) const {
  return walk([&](std::size_t f) { return x[f]; });
}

double RegressionTree::predict(const FeatureMatrix& x, std::size_t row) const {
  return walk([&](std::size_t f) { return x.at(row, f); });
}

struct TreeBuilder::Candidate {
  double gain = 0.0;
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
};

TreeBuilder::TreeBuilder(const FeatureMatrix& x, std::span<const std::size_t> universe, TreeParams params)
    : x_(x), params_(params), in_sample_(x.rows(), 0), goes_left_(x.rows(), 0) {
  if (params_.min_node < 1) throw ConfigError("min_node must be >= 1");
  if (params_.depth_limit < 0) throw ConfigError("depth limit must be >= 0");
  constexpr std::size_t kMaxBins = 1024;
  std::size_t widest = 0;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    if (x.schema().feature(f).kind != FeatureKind::numeric) {
      categorical_features_.push_back(f);
      continue;
    }
    const auto col = x.column(f);
    std::vector<double> distinct;
    distinct.reserve(universe.size());
    for (auto r : universe) distinct.push_back(col[r]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) continue;
    numeric_features_.push_back(f);
    if (distinct.size() <= kMaxBins) {
      Binned b;
      b.code.assign(x.rows(), 0);
      for (auto r : universe) {
        b.code[r] = static_cast<std::uint16_t>(std::lower_bound(distinct.begin(), distinct.end(), col[r]) -
                                               distinct.begin());
      }
      widest = std::max(widest, distinct.size());
      b.values = std::move(distinct);
      numeric_slot_.push_back(static_cast<int>(binned_.size()));
      binned_.push_back(std::move(b));
    } else {
      numeric_slot_.push_back(-1 - static_cast<int>(presorted_.size()));
      auto& order = presorted_.emplace_back(universe.begin(), universe.end());
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
    }
  }
  sorted_.resize(presorted_.size());
  bin_sum_.assign(std::max<std::size_t>(widest, 64), 0.0);
  bin_count_.assign(bin_sum_.size(), 0);
}

TreeBuilder::Candidate TreeBuilder::best_split(std::size_t begin, std::size_t end,
                                               std::span<const double> targets) const {
  Candidate best;
  const std::size_t n = end - begin;
  const auto min_node = static_cast<std::size_t>(params_.min_node);
  if (n < 2 * min_node) return best;

  double node_sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) node_sum += targets[rows_[i]];
  const double node_mean = node_sum / static_cast<double>(n);
  double node_sse = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double d = targets[rows_[i]] - node_mean;
    node_sse += d * d;
  }
  if (node_sse <= 0.0) return best;
  // Splits whose gain is within rounding of zero are treated as no gain.
  const double min_gain = 1e-12 * node_sse;
  const double dn = static_cast<double>(n);

  auto offer = [&](double gain, std::size_t f, double a, double b) {
    if (gain > best.gain && gain > min_gain) {
      double mid = a + (b - a) / 2.0;
      if (mid >= b) mid = a;
      best = Candidate{gain, static_cast<int>(f), false, mid, 0};
    }
  };
  for (std::size_t k = 0; k < numeric_features_.size(); ++k) {
    const std::size_t f = numeric_features_[k];
    const int slot = numeric_slot_[k];
    if (slot >= 0) {
      const auto& bin = binned_[static_cast<std::size_t>(slot)];
      const std::size_t n_bins = bin.values.size();
      std::fill_n(bin_sum_.begin(), n_bins, 0.0);
      std::fill_n(bin_count_.begin(), n_bins, 0);
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = rows_[i];
        bin_sum_[bin.code[r]] += targets[r] - node_mean;
        ++bin_count_[bin.code[r]];
      }
      double left_sum = 0.0;
      std::size_t n_left = 0;
      std::size_t prev = n_bins;
      for (std::size_t v = 0; v < n_bins; ++v) {
        if (bin_count_[v] == 0) continue;
        if (prev != n_bins && n_left >= min_node && n - n_left >= min_node) {
          const double gain =
              left_sum * left_sum * dn / (static_cast<double>(n_left) * static_cast<double>(n - n_left));
          offer(gain, f, bin.values[prev], bin.values[v]);
        }
        left_sum += bin_sum_[v];
        n_left += bin_count_[v];
        prev = v;
        if (n - n_left < min_node) break;
      }
      continue;
    }
    const auto col = x_.column(f);
    const auto& order = sorted_[static_cast<std::size_t>(-1 - slot)];
    double left_sum = 0.0;
    for (std::size_t i = begin; i + 1 < end; ++i) {
      left_sum += targets[order[i]] - node_mean;
      const std::size_t n_left = i - begin + 1;
      if (n_left < min_node) continue;
      if (n - n_left < min_node) break;
      const double a = col[order[i]];
      const double b = col[order[i + 1]];
      if (!(a < b)) continue;
      offer(left_sum * left_sum * dn / (static_cast<double>(n_left) * static_cast<double>(n - n_left)), f, a, b);
    }
  }

  for (std::size_t f : categorical_features_) {
    const auto& spec = x_.schema().feature(f);
    const std::size_t n_levels = spec.levels.size();
    std::array<double, 64> sum{};
    std::array<std::size_t, 64> count{};
    const auto col = x_.column(f);
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = rows_[i];
      const auto level = static_cast<std::size_t>(col[r]);
      sum[level] += targets[r] - node_mean;
      ++count[level];
    }
    std::array<std::size_t, 64> observed{};
    std::size_t n_observed = 0;
    for (std::size_t l = 0; l < n_levels; ++l) {
      if (count[l] > 0) observed[n_observed++] = l;
    }
    if (n_observed < 2) continue;
    std::stable_sort(observed.begin(), observed.begin() + static_cast<std::ptrdiff_t>(n_observed),
                     [&](std::size_t a, std::size_t b) {
                       return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
                     });
    double left_sum = 0.0;
    std::size_t n_left = 0;
    std::uint64_t mask = 0;
    for (std::size_t j = 0; j + 1 < n_observed; ++j) {
      const std::size_t l = observed[j];
      left_sum += sum[l];
      n_left += count[l];
      mask |= 1ULL << l;
      if (n_left < min_node || n - n_left < min_node) continue;
      const double gain = left_sum * left_sum * dn / (static_cast<double>(n_left) * static_cast<double>(n - n_left));
      if (gain > best.gain && gain > min_gain) {
        std::uint64_t full = mask;
        const auto missing = static_cast<std::size_t>(n_levels - 1);
        bool unseen_left;
        if (count[missing] > 0) {
          unseen_left = (mask >> missing) & 1ULL;
        } else {
          unseen_left = n_left >= n - n_left;
        }
        if (unseen_left) {
          for (std::size_t l = 0; l < n_levels; ++l) {
            if (count[l] == 0) full |= 1ULL << l;
          }
        }
        best = Candidate{gain, static_cast<int>(f), true, 0.0, full};
      }
    }
  }
  return best;
}

RegressionTree TreeBuilder::fit(std::span<const std::size_t> sample, std::span<const double> targets) {
  if (!presorted_.empty()) {
    for (auto r : sample) in_sample_[r] = 1;
    for (std::size_t k = 0; k < presorted_.size(); ++k) {
      auto& out = sorted_[k];
      out.clear();
      for (auto r : presorted_[k]) {
        if (in_sample_[r]) out.push_back(r);
      }
    }
    for (auto r : sample) in_sample_[r] = 0;
  }
  rows_.assign(sample.begin(), sample.end());

  struct Open {
    int node;
    std::size_t begin, end;
    int depth;
    Candidate split;
  };
  struct ByGain {
    bool operator()(const Open& a, const Open& b) const {
      if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
      return a.node > b.node;
    }
  };

  const bool by_depth = params_.size_limit == SizeLimit::depth;
  const int depth_cap = by_depth ? params_.depth_limit : 64;
  const int split_cap = by_depth ? INT32_MAX : params_.depth_limit;

  std::vector<TreeNode> nodes;
  auto make_node = [&](std::size_t begin, std::size_t end) {
    TreeNode node;
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += targets[rows_[i]];
    node.count = static_cast<int>(end - begin);
    node.value = end > begin ? s / static_cast<double>(end - begin) : 0.0;
    nodes.push_back(node);
    return static_cast<int>(nodes.size() - 1);
  };

  std::priority_queue<Open, std::vector<Open>, ByGain> open;
  auto consider = [&](int node, std::size_t begin, std::size_t end, int depth) {
    if (depth >= depth_cap) return;
    auto split = best_split(begin, end, targets);
    if (split.feature >= 0) open.push(Open{node, begin, end, depth, split});
  };

  consider(make_node(0, rows_.size()), 0, rows_.size(), 0);
  int splits = 0;
  while (!open.empty() && splits < split_cap) {
    const Open item = open.top();
    open.pop();
    const auto& split = item.split;
    const auto f = static_cast<std::size_t>(split.feature);
    const auto col = x_.column(f);
    std::size_t n_left = 0;
    for (std::size_t i = item.begin; i < item.end; ++i) {
      const auto r = rows_[i];
      const bool left = split.categorical ? ((split.left_levels >> static_cast<unsigned>(col[r])) & 1ULL)
                                          : col[r] <= split.threshold;
      goes_left_[r] = left ? 1 : 0;
      n_left += left;
    }
    auto partition = [&](std::vector<std::size_t>& v) {
      scratch_.clear();
      std::size_t w = item.begin;
      for (std::size_t i = item.begin; i < item.end; ++i) {
        if (goes_left_[v[i]]) {
          v[w++] = v[i];
        } else {
          scratch_.push_back(v[i]);
        }
      }
      std::copy(scratch_.begin(), scratch_.end(), v.begin() + static_cast<std::ptrdiff_t>(w));
    };
    partition(rows_);
    for (auto& v : sorted_) partition(v);

    const std::size_t mid = item.begin + n_left;
    const int left = make_node(item.begin, mid);
    const int right = make_node(mid, item.end);
    auto& parent = nodes[static_cast<std::size_t>(item.node)];
    parent.feature = split.feature;
    parent.categorical = split.categorical;
    parent.threshold = split.threshold;
    parent.left_levels = split.left_levels;
    parent.gain = split.gain;
    parent.left = left;
    parent.right = right;
    ++splits;
    consider(left, item.begin, mid, item.depth + 1);
    consider(right, mid, item.end, item.depth + 1);
  }
  return RegressionTree(std::move(nodes));
}

RegressionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets, const TreeParams& params) {
  if (targets.size() != x.rows()) throw ConfigError("fit_tree: rows and targets differ in length");
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  TreeBuilder builder(x, all, params);
  return builder.fit(all, targets);
}

}  // namespace geomatch

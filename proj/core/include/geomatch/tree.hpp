#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "geomatch/feature_matrix.hpp"

namespace geomatch {

/// What `TreeParams::depth_limit` bounds. `depth` caps the root-to-leaf
/// depth; `max_splits` grows best-first and caps the number of splits.
enum class SizeLimit { depth, max_splits };

struct TreeParams {
  int depth_limit = 6;
  int min_node = 10;  // minimum rows in every leaf
  SizeLimit size_limit = SizeLimit::depth;
};

/// Split node or leaf. Numeric splits send `x <= threshold` left; categorical
/// splits send levels whose bit is set in `left_levels` left. Levels that were
/// not observed at the node follow the "missing" level, or the larger child
/// when "missing" was not observed either.
struct TreeNode {
  int feature = -1;  // -1 for leaves
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the rows that reached the node
  double gain = 0.0;   // squared-error reduction of the split
  int count = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() : nodes_{TreeNode{}} {}
  explicit RegressionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t split_count() const noexcept { return nodes_.size() / 2; }
  int depth() const;

  double predict(std::span<const double> x) const;
  double predict(const FeatureMatrix& x, std::size_t row) const;

  bool operator==(const RegressionTree&) const = default;

 private:
  template <typename Get>
  double walk(Get&& get) const;

  std::vector<TreeNode> nodes_;
};

/// Greedy variance-reduction tree over all rows of `x`. Numeric thresholds
/// sit at midpoints between consecutive distinct values; categorical splits
/// partition levels ordered by mean target into a prefix and a suffix.
RegressionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets, const TreeParams& params);

/// Reusable builder: indexes `universe` (row indices of `x`) once, then fits
/// trees on arbitrary subsets of it. Targets are indexed by matrix row.
/// Features constant over the universe are never split on.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const std::size_t> universe, TreeParams params);

  RegressionTree fit(std::span<const std::size_t> sample, std::span<const double> targets);

 private:
  struct Candidate;
  Candidate best_split(std::size_t begin, std::size_t end, std::span<const double> targets) const;

  const FeatureMatrix& x_;
  TreeParams params_;
  std::vector<std::size_t> numeric_features_;
  std::vector<std::size_t> categorical_features_;
  // Low-cardinality numeric features: per-row bin codes over their distinct values.
  struct Binned {
    std::vector<double> values;
    std::vector<std::uint16_t> code;  // indexed by matrix row
  };
  // Per numeric feature: index into binned_ or, when negative, -1 - index into presorted_.
  std::vector<int> numeric_slot_;
  std::vector<Binned> binned_;
  std::vector<std::vector<std::size_t>> presorted_;  // universe rows by value
  // Per-fit scratch.
  std::vector<std::vector<std::size_t>> sorted_;  // per presorted feature, node-contiguous segments
  mutable std::vector<double> bin_sum_;
  mutable std::vector<std::size_t> bin_count_;
  std::vector<std::size_t> rows_;                 // node-contiguous segments in arbitrary order
  std::vector<std::uint8_t> in_sample_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::size_t> scratch_;
};

}  // namespace geomatch

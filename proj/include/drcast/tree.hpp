#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "drcast/design.hpp"

namespace drcast {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean outcome of the samples routed here
  int count = 0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  Eigen::Index dimension = 0;
};

namespace detail {

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double child_sse = 0.0;
};

inline double subset_sse(const Eigen::VectorXd& y, const std::vector<int>& idx) {
  double sum = 0.0;
  for (const int i : idx) sum += y(i);
  const double mu = sum / static_cast<double>(idx.size());
  double sse = 0.0;
  for (const int i : idx) sse += (y(i) - mu) * (y(i) - mu);
  return sse;
}

// Exhaustive search over every feature and every midpoint between
// consecutive distinct sorted values. Minimizing the weighted child MSE is
// the same as minimizing the summed child SSE, which a prefix sweep gives
// in O(n) per feature after sorting.
inline SplitCandidate best_split(const DesignMatrix& data, const std::vector<int>& idx,
                                 int min_samples_leaf) {
  const int n = static_cast<int>(idx.size());
  SplitCandidate best;
  std::vector<int> order(idx);
  for (int feature = 0; feature < data.cols(); ++feature) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double va = data.X(a, feature), vb = data.X(b, feature);
      return va < vb || (va == vb && a < b);
    });
    double total = 0.0, total2 = 0.0;
    for (const int i : order) {
      total += data.y(i);
      total2 += data.y(i) * data.y(i);
    }
    double left_sum = 0.0, left_sum2 = 0.0;
    for (int s = 1; s < n; ++s) {
      const double yv = data.y(order[s - 1]);
      left_sum += yv;
      left_sum2 += yv * yv;
      const double lo = data.X(order[s - 1], feature);
      const double hi = data.X(order[s], feature);
      if (lo == hi) continue;
      if (s < min_samples_leaf || n - s < min_samples_leaf) continue;
      const double sse_l = left_sum2 - left_sum * left_sum / s;
      const double right_sum = total - left_sum;
      const double sse_r = (total2 - left_sum2) - right_sum * right_sum / (n - s);
      const double sse = sse_l + sse_r;
      if (!best.found || sse < best.child_sse) {
        double threshold = 0.5 * (lo + hi);
        if (threshold >= hi) threshold = lo;  // keep the routing rule x <= t exact
        best.found = true;
        best.feature = feature;
        best.threshold = threshold;
        best.child_sse = sse;
      }
    }
  }
  return best;
}

inline int build_node(RegressionTree& tree, const DesignMatrix& data, std::vector<int> idx,
                      int depth, int max_depth, int min_samples_leaf) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  {
    double sum = 0.0;
    for (const int i : idx) sum += data.y(i);
    tree.nodes[id].value = sum / static_cast<double>(idx.size());
    tree.nodes[id].count = static_cast<int>(idx.size());
  }
  if (depth >= max_depth || static_cast<int>(idx.size()) < 2 * min_samples_leaf)
    return id;

  const double parent_sse = subset_sse(data.y, idx);
  const SplitCandidate split = best_split(data, idx, min_samples_leaf);
  // Require a strictly positive gain beyond float noise; a pure node stays a
  // leaf even when cancellation makes its SSE a few ulp away from zero.
  const double gain = parent_sse - split.child_sse;
  if (!split.found || gain <= 1e-12 * (parent_sse + 1.0)) return id;

  std::vector<int> left, right;
  for (const int i : idx) {
    (data.X(i, split.feature) <= split.threshold ? left : right).push_back(i);
  }
  idx.clear();
  idx.shrink_to_fit();

  tree.nodes[id].feature = split.feature;
  tree.nodes[id].threshold = split.threshold;
  const int l = build_node(tree, data, std::move(left), depth + 1, max_depth, min_samples_leaf);
  const int r = build_node(tree, data, std::move(right), depth + 1, max_depth, min_samples_leaf);
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace detail

inline RegressionTree fit_tree(const DesignMatrix& data, int max_depth, int min_samples_leaf) {
  data.validate();
  if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  RegressionTree tree;
  tree.dimension = data.cols();
  std::vector<int> idx(static_cast<std::size_t>(data.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  detail::build_node(tree, data, std::move(idx), 0, max_depth, min_samples_leaf);
  return tree;
}

// Routes x through the decision rules; ties at a threshold go left.
inline double tree_predict(const RegressionTree& tree, const Eigen::VectorXd& x) {
  if (x.size() != tree.dimension) throw std::invalid_argument("covariate dimension mismatch");
  int id = 0;
  while (tree.nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    id = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].value;
}

}  // namespace drcast

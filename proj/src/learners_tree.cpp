#include <algorithm>
#include <cmath>
#include <numeric>

#include "ipsi/parallel.hpp"
#include "learners_impl.hpp"

namespace ipsi {
namespace detail {

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // SSE after split, smaller is better
};

struct NodeWork {
  int node = 0;
  int depth = 0;
  std::vector<int> rows;
};

}  // namespace

Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               std::vector<int> rows, const TreeGrowParams& params, Rng& rng) {
  const int p = static_cast<int>(x.cols());
  const int mtry =
      (params.mtry <= 0 || params.mtry >= p) ? p : params.mtry;

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<NodeWork> stack;
  stack.push_back({0, 0, std::move(rows)});

  std::vector<int> feature_pool(static_cast<size_t>(p));
  std::iota(feature_pool.begin(), feature_pool.end(), 0);
  std::vector<std::pair<double, double>> sorted;  // (feature value, centered y)

  while (!stack.empty()) {
    NodeWork work = std::move(stack.back());
    stack.pop_back();
    const auto& node_rows = work.rows;
    const int m = static_cast<int>(node_rows.size());

    double sum = 0.0;
    for (int r : node_rows) sum += y(r);
    const double mean = sum / m;
    tree.nodes[static_cast<size_t>(work.node)].value = mean;

    if (m < 2 * params.min_leaf) continue;
    if (params.max_depth >= 0 && work.depth >= params.max_depth) continue;

    // Work on centered responses so the SSE sweep stays well conditioned
    // for outcomes far from zero.
    double total_ss = 0.0, total_centered = 0.0;
    for (int r : node_rows) {
      double c = y(r) - mean;
      total_ss += c * c;
      total_centered += c;
    }
    if (total_ss == 0.0) continue;

    // Candidate features in natural order, or a seeded partial shuffle
    // when subsampling.
    if (mtry < p) {
      for (int i = 0; i < mtry; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - i)));
        std::swap(feature_pool[static_cast<size_t>(i)],
                  feature_pool[static_cast<size_t>(j)]);
      }
    }

    SplitChoice best;
    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feature_pool[static_cast<size_t>(fi)];
      sorted.clear();
      sorted.reserve(static_cast<size_t>(m));
      for (int r : node_rows) sorted.emplace_back(x(r, f), y(r) - mean);
      std::sort(sorted.begin(), sorted.end());

      double left_sum = 0.0, left_ss = 0.0;
      for (int i = 0; i + 1 < m; ++i) {
        const double c = sorted[static_cast<size_t>(i)].second;
        left_sum += c;
        left_ss += c * c;
        const int n_left = i + 1;
        const int n_right = m - n_left;
        if (n_left < params.min_leaf || n_right < params.min_leaf) continue;
        if (sorted[static_cast<size_t>(i)].first ==
            sorted[static_cast<size_t>(i + 1)].first)
          continue;
        const double right_sum = total_centered - left_sum;
        const double right_ss = total_ss - left_ss;
        const double score = (left_ss - left_sum * left_sum / n_left) +
                             (right_ss - right_sum * right_sum / n_right);
        if (!best.found || score < best.score) {
          best.found = true;
          best.feature = f;
          best.threshold = 0.5 * (sorted[static_cast<size_t>(i)].first +
                                  sorted[static_cast<size_t>(i + 1)].first);
          best.score = score;
        }
      }
    }
    if (!best.found) continue;

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(node_rows.size());
    right_rows.reserve(node_rows.size());
    for (int r : node_rows) {
      (x(r, best.feature) <= best.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) continue;

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& parent = tree.nodes[static_cast<size_t>(work.node)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.left = left_id;
    parent.right = right_id;
    stack.push_back({right_id, work.depth + 1, std::move(right_rows)});
    stack.push_back({left_id, work.depth + 1, std::move(left_rows)});
  }
  return tree;
}

Eigen::VectorXd TreeModel::predict_impl(const Eigen::MatrixXd& features) const {
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out(i) = tree_.predict_row(features, i);
  return out;
}

Eigen::VectorXd ForestModel::predict_impl(
    const Eigen::MatrixXd& features) const {
  Eigen::VectorXd out(features.rows());
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    double acc = 0.0;
    for (const Tree& tree : trees_) acc += tree.predict_row(features, i);
    out(i) = acc * inv;
  }
  if (task() == Task::probability) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

ModelPtr fit_tree(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& targets, Task task) {
  TreeGrowParams params;
  params.max_depth = spec.max_depth;
  params.min_leaf = std::max(1, spec.min_leaf);
  params.mtry = 0;
  std::vector<int> rows(static_cast<size_t>(features.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(derive_seed(spec.seed, {0x74726565ULL}));
  Tree tree = grow_tree(features, targets, std::move(rows), params, rng);
  return std::make_shared<TreeModel>(task, static_cast<int>(features.cols()),
                                     std::move(tree));
}

ModelPtr fit_forest(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& targets, Task task, int threads) {
  const int n = static_cast<int>(features.rows());
  const int p = static_cast<int>(features.cols());
  const int n_trees = std::max(1, spec.n_trees);
  TreeGrowParams params;
  params.max_depth = spec.max_depth;
  params.min_leaf = std::max(1, spec.min_leaf);
  params.mtry = spec.mtry > 0
                    ? spec.mtry
                    : std::max(1, static_cast<int>(std::lround(
                                      std::sqrt(static_cast<double>(p)))));

  std::vector<Tree> trees(static_cast<size_t>(n_trees));
  parallel_for(n_trees, threads, [&](std::int64_t b) {
    Rng rng(derive_seed(spec.seed, {0x666f72ULL, static_cast<std::uint64_t>(b)}));
    std::vector<int> rows;
    rows.reserve(static_cast<size_t>(n));
    if (spec.bootstrap) {
      for (int i = 0; i < n; ++i)
        rows.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    } else {
      rows.resize(static_cast<size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees[static_cast<size_t>(b)] =
        grow_tree(features, targets, std::move(rows), params, rng);
  });
  return std::make_shared<ForestModel>(task, p, std::move(trees));
}

}  // namespace detail
}  // namespace ipsi

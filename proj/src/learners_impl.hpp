#pragma once

#include <vector>

#include "ipsi/learners.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {
namespace detail {

constexpr double kLogisticClip = 1e-6;

class GlmModel : public FittedModel {
 public:
  GlmModel(Task task, int n_features, bool logistic, bool interactions,
           Eigen::VectorXd beta)
      : FittedModel(task, n_features),
        logistic_(logistic),
        interactions_(interactions),
        beta_(std::move(beta)) {}

  const Eigen::VectorXd& coefficients() const { return beta_; }
  bool is_logistic() const { return logistic_; }

 protected:
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& features) const override;

 private:
  bool logistic_;
  bool interactions_;
  Eigen::VectorXd beta_;  // intercept first
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
    int node = 0;
    while (nodes[static_cast<size_t>(node)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<size_t>(node)];
      node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(node)].value;
  }
};

struct TreeGrowParams {
  int max_depth = -1;
  int min_leaf = 5;
  int mtry = 0;  // 0 or >= p: evaluate every feature in natural order
};

// rows may contain duplicates (bootstrap resamples). rng is only consumed
// when 0 < mtry < p, so a no-subsampling forest tree reproduces the plain
// CART fit exactly.
Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               std::vector<int> rows, const TreeGrowParams& params, Rng& rng);

class TreeModel : public FittedModel {
 public:
  TreeModel(Task task, int n_features, Tree tree)
      : FittedModel(task, n_features), tree_(std::move(tree)) {}
  const Tree& tree() const { return tree_; }

 protected:
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& features) const override;

 private:
  Tree tree_;
};

class ForestModel : public FittedModel {
 public:
  ForestModel(Task task, int n_features, std::vector<Tree> trees)
      : FittedModel(task, n_features), trees_(std::move(trees)) {}
  const std::vector<Tree>& trees() const { return trees_; }

 protected:
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& features) const override;

 private:
  std::vector<Tree> trees_;
};

class CvEnsembleModel : public FittedModel {
 public:
  CvEnsembleModel(Task task, int n_features, CvSelection selection,
                  ModelPtr inner)
      : FittedModel(task, n_features),
        selection_(std::move(selection)),
        inner_(std::move(inner)) {}
  const CvSelection& selection() const { return selection_; }

 protected:
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& features) const override {
    return inner_->predict(features);
  }

 private:
  CvSelection selection_;
  ModelPtr inner_;
};

ModelPtr fit_glm(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                 const Eigen::VectorXd& targets, Task task);
ModelPtr fit_tree(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& targets, Task task);
ModelPtr fit_forest(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& targets, Task task, int threads);

}  // namespace detail
}  // namespace ipsi

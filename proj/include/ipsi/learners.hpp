#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ipsi/errors.hpp"

namespace ipsi {

enum class Task { probability, regression };

enum class LearnerKind { logistic, linear, tree, forest, cv_ensemble };

// Fitting is deterministic given (spec, training data): all randomness
// (bagging, feature subsampling, CV splits) streams from `seed`.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::linear;
  // Augment features with pairwise products of distinct columns.
  bool interactions = false;
  double ridge = 0.0;  // linear: L2 penalty on non-intercept coefficients
  int max_depth = -1;  // trees: -1 unbounded, 0 fits the root mean
  int min_leaf = 5;
  int n_trees = 500;
  int mtry = 0;  // features tried per split; 0 = all (tree) / round(sqrt(p)) (forest)
  bool bootstrap = true;  // forest row bagging
  int cv_folds = 5;       // cv_ensemble internal folds
  std::uint64_t seed = 0;
  // cv_ensemble candidate library; empty selects a default set for the task.
  std::vector<LearnerSpec> candidates;
};

class FittedModel {
 public:
  virtual ~FittedModel() = default;
  // Total on any finite matrix with the training column count; probability
  // models emit values in [0, 1].
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
  Task task() const { return task_; }
  int n_features() const { return n_features_; }

 protected:
  FittedModel(Task task, int n_features)
      : task_(task), n_features_(n_features) {}
  virtual Eigen::VectorXd predict_impl(const Eigen::MatrixXd& features) const = 0;

 private:
  Task task_;
  int n_features_;
};

using ModelPtr = std::shared_ptr<const FittedModel>;

// `threads` caps internal parallelism (independent trees); outputs are
// identical for any value.
ModelPtr fit(const LearnerSpec& spec, const Eigen::MatrixXd& features,
             const Eigen::VectorXd& targets, Task task, int threads = 1);

struct CvSelection {
  LearnerSpec spec;  // winning candidate
  int winner_index = 0;
  double cv_mse = 0.0;
  std::vector<double> candidate_mse;
};

// Discrete selector: K-fold CV MSE per candidate, minimum wins, ties
// broken by candidate order. Folds come from assign_folds(n, folds, seed);
// candidate fits inside the CV loop use seeds derived from `seed`.
CvSelection cv_select(const std::vector<LearnerSpec>& candidates,
                      const Eigen::MatrixXd& features,
                      const Eigen::VectorXd& targets, Task task, int folds,
                      std::uint64_t seed, int threads = 1);

// Default cv_ensemble candidate library for a task: main-effect and
// pairwise-interaction GLM, a depth-limited tree, and a random forest.
std::vector<LearnerSpec> default_candidates(Task task, int forest_trees = 100);

// Key-value text form used by the CLI and config files, e.g.
//   logistic
//   linear:interactions=1,ridge=0.001
//   forest:n_trees=250,min_leaf=5
//   cv(linear|linear:interactions=1|tree:max_depth=8|forest:n_trees=100)
LearnerSpec parse_learner_spec(const std::string& text);
std::string format_learner_spec(const LearnerSpec& spec);

// Pairwise-product feature expansion (distinct pairs, original columns
// first); shared by the GLM learners and exposed for tests.
Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& features);

// Coefficient access for the GLM learners (intercept first, then the,
// possibly expanded, feature coefficients). Throws unless `model` is a
// logistic or linear fit.
const Eigen::VectorXd& glm_coefficients(const FittedModel& model);

// Per-tree predictions of a forest fit, for auditing the ensemble average.
Eigen::VectorXd forest_tree_prediction(const FittedModel& model, int tree,
                                       const Eigen::MatrixXd& features);
int forest_size(const FittedModel& model);

// Selection metadata of a cv_ensemble fit.
const CvSelection& ensemble_selection(const FittedModel& model);

}  // namespace ipsi

#include "ipsi/learners.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ipsi/dataset.hpp"
#include "learners_impl.hpp"

namespace ipsi {

Eigen::MatrixXd expand_pairwise(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  Eigen::MatrixXd out(n, p + p * (p - 1) / 2);
  out.leftCols(p) = features;
  Eigen::Index col = p;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j)
      out.col(col++) = features.col(i).cwiseProduct(features.col(j));
  return out;
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& features) const {
  require(static_cast<int>(features.cols()) == n_features_,
          ErrorCode::dimension_mismatch,
          "predict expected " + std::to_string(n_features_) +
              " feature columns, got " + std::to_string(features.cols()));
  require(features.allFinite(), ErrorCode::non_finite_input,
          "non-finite value in prediction features");
  return predict_impl(features);
}

namespace {

void validate_training_input(const Eigen::MatrixXd& features,
                             const Eigen::VectorXd& targets, Task task) {
  require(features.rows() >= 1, ErrorCode::empty_training_set,
          "empty training set");
  require(features.rows() == targets.size(), ErrorCode::dimension_mismatch,
          "feature rows (" + std::to_string(features.rows()) +
              ") != target length (" + std::to_string(targets.size()) + ")");
  require(features.allFinite() && targets.allFinite(),
          ErrorCode::non_finite_input, "non-finite value in training data");
  if (task == Task::probability)
    require(targets.minCoeff() >= 0.0 && targets.maxCoeff() <= 1.0,
            ErrorCode::pi_out_of_range,
            "probability task requires targets in [0,1]");
}

}  // namespace

std::vector<LearnerSpec> default_candidates(Task task, int forest_trees) {
  LearnerSpec glm;
  glm.kind = task == Task::probability ? LearnerKind::logistic
                                       : LearnerKind::linear;
  LearnerSpec glm_int = glm;
  glm_int.interactions = true;
  LearnerSpec tree;
  tree.kind = LearnerKind::tree;
  tree.max_depth = 8;
  tree.min_leaf = 10;
  LearnerSpec forest;
  forest.kind = LearnerKind::forest;
  forest.n_trees = forest_trees;
  return {glm, glm_int, tree, forest};
}

ModelPtr fit(const LearnerSpec& spec, const Eigen::MatrixXd& features,
             const Eigen::VectorXd& targets, Task task, int threads) {
  validate_training_input(features, targets, task);
  switch (spec.kind) {
    case LearnerKind::logistic:
    case LearnerKind::linear:
      return detail::fit_glm(spec, features, targets, task);
    case LearnerKind::tree:
      return detail::fit_tree(spec, features, targets, task);
    case LearnerKind::forest:
      return detail::fit_forest(spec, features, targets, task, threads);
    case LearnerKind::cv_ensemble: {
      std::vector<LearnerSpec> candidates =
          spec.candidates.empty() ? default_candidates(task)
                                  : spec.candidates;
      CvSelection selection =
          cv_select(candidates, features, targets, task, spec.cv_folds,
                    derive_seed(spec.seed, {0x73656cULL}), threads);
      LearnerSpec winner = selection.spec;
      winner.seed = derive_seed(spec.seed, {0x77696eULL});
      ModelPtr inner = fit(winner, features, targets, task, threads);
      return std::make_shared<detail::CvEnsembleModel>(
          task, static_cast<int>(features.cols()), std::move(selection),
          std::move(inner));
    }
  }
  fail(ErrorCode::invalid_config, "unknown learner kind");
}

CvSelection cv_select(const std::vector<LearnerSpec>& candidates,
                      const Eigen::MatrixXd& features,
                      const Eigen::VectorXd& targets, Task task, int folds,
                      std::uint64_t seed, int threads) {
  require(!candidates.empty(), ErrorCode::empty_candidates,
          "cv_select needs at least one candidate");
  validate_training_input(features, targets, task);
  const int n = static_cast<int>(features.rows());
  require(folds >= 2, ErrorCode::invalid_k, "cv_select needs folds >= 2");
  require(folds <= n, ErrorCode::invalid_k,
          "cv_select needs folds <= training rows");

  FoldAssignment assignment = assign_folds(n, folds, seed);

  std::vector<double> mse(candidates.size(), 0.0);
  for (size_t c = 0; c < candidates.size(); ++c) {
    double sse = 0.0;
    for (int f = 1; f <= folds; ++f) {
      std::vector<int> train, test;
      for (int i = 0; i < n; ++i)
        (assignment.labels[static_cast<size_t>(i)] == f ? test : train)
            .push_back(i);
      Eigen::MatrixXd x_train = features(train, Eigen::all);
      Eigen::VectorXd y_train = targets(train);
      Eigen::MatrixXd x_test = features(test, Eigen::all);
      LearnerSpec cspec = candidates[c];
      cspec.seed = derive_seed(seed, {c, static_cast<std::uint64_t>(f)});
      ModelPtr model = fit(cspec, x_train, y_train, task, threads);
      Eigen::VectorXd pred = model->predict(x_test);
      for (size_t i = 0; i < test.size(); ++i) {
        double e = pred(static_cast<Eigen::Index>(i)) -
                   targets(test[i]);
        sse += e * e;
      }
    }
    mse[c] = sse / n;
  }

  int winner = 0;
  for (size_t c = 1; c < candidates.size(); ++c)
    if (mse[c] < mse[static_cast<size_t>(winner)])
      winner = static_cast<int>(c);
  return {candidates[static_cast<size_t>(winner)], winner,
          mse[static_cast<size_t>(winner)], mse};
}

const Eigen::VectorXd& glm_coefficients(const FittedModel& model) {
  const auto* glm = dynamic_cast<const detail::GlmModel*>(&model);
  require(glm != nullptr, ErrorCode::invalid_config,
          "model is not a GLM fit");
  return glm->coefficients();
}

int forest_size(const FittedModel& model) {
  const auto* forest = dynamic_cast<const detail::ForestModel*>(&model);
  require(forest != nullptr, ErrorCode::invalid_config,
          "model is not a forest fit");
  return static_cast<int>(forest->trees().size());
}

Eigen::VectorXd forest_tree_prediction(const FittedModel& model, int tree,
                                       const Eigen::MatrixXd& features) {
  const auto* forest = dynamic_cast<const detail::ForestModel*>(&model);
  require(forest != nullptr, ErrorCode::invalid_config,
          "model is not a forest fit");
  require(tree >= 0 && tree < static_cast<int>(forest->trees().size()),
          ErrorCode::invalid_config, "tree index out of range");
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out(i) = forest->trees()[static_cast<size_t>(tree)].predict_row(features, i);
  return out;
}

const CvSelection& ensemble_selection(const FittedModel& model) {
  const auto* ens = dynamic_cast<const detail::CvEnsembleModel*>(&model);
  require(ens != nullptr, ErrorCode::invalid_config,
          "model is not a cv ensemble fit");
  return ens->selection();
}

namespace {

LearnerKind parse_kind(const std::string& name) {
  if (name == "logistic") return LearnerKind::logistic;
  if (name == "linear") return LearnerKind::linear;
  if (name == "tree") return LearnerKind::tree;
  if (name == "forest") return LearnerKind::forest;
  if (name == "cv") return LearnerKind::cv_ensemble;
  fail(ErrorCode::invalid_config, "unknown learner kind '" + name + "'");
}

const char* kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::linear: return "linear";
    case LearnerKind::tree: return "tree";
    case LearnerKind::forest: return "forest";
    case LearnerKind::cv_ensemble: return "cv";
  }
  return "?";
}

double parse_option_number(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  require(res.ec == std::errc() && res.ptr == value.data() + value.size(),
          ErrorCode::invalid_config,
          "learner option '" + key + "' has non-numeric value '" + value + "'");
  return out;
}

void apply_option(LearnerSpec& spec, const std::string& key,
                  const std::string& value) {
  const double v = parse_option_number(key, value);
  if (key == "interactions") {
    spec.interactions = v != 0.0;
  } else if (key == "ridge") {
    spec.ridge = v;
  } else if (key == "max_depth") {
    spec.max_depth = static_cast<int>(v);
  } else if (key == "min_leaf") {
    spec.min_leaf = static_cast<int>(v);
  } else if (key == "n_trees") {
    spec.n_trees = static_cast<int>(v);
  } else if (key == "mtry") {
    spec.mtry = static_cast<int>(v);
  } else if (key == "bootstrap") {
    spec.bootstrap = v != 0.0;
  } else if (key == "cv_folds") {
    spec.cv_folds = static_cast<int>(v);
  } else if (key == "seed") {
    spec.seed = static_cast<std::uint64_t>(v);
  } else {
    fail(ErrorCode::invalid_config, "unknown learner option '" + key + "'");
  }
}

LearnerSpec parse_simple(const std::string& text) {
  LearnerSpec spec;
  auto colon = text.find(':');
  spec.kind = parse_kind(text.substr(0, colon));
  if (colon == std::string::npos) return spec;
  std::string rest = text.substr(colon + 1);
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_config,
            "learner option '" + item + "' is not key=value");
    apply_option(spec, item.substr(0, eq), item.substr(eq + 1));
  }
  return spec;
}

}  // namespace

LearnerSpec parse_learner_spec(const std::string& text) {
  require(!text.empty(), ErrorCode::invalid_config, "empty learner spec");
  auto paren = text.find('(');
  if (paren == std::string::npos) return parse_simple(text);

  require(text.back() == ')', ErrorCode::invalid_config,
          "unbalanced parentheses in learner spec '" + text + "'");
  LearnerSpec spec = parse_simple(text.substr(0, paren));
  require(spec.kind == LearnerKind::cv_ensemble, ErrorCode::invalid_config,
          "only the cv learner takes a candidate list");
  std::string inner = text.substr(paren + 1, text.size() - paren - 2);
  if (!inner.empty()) {
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, '|'))
      if (!item.empty()) spec.candidates.push_back(parse_simple(item));
  }
  return spec;
}

std::string format_learner_spec(const LearnerSpec& spec) {
  LearnerSpec defaults;
  std::string opts;
  auto add = [&](const std::string& kv) {
    opts += (opts.empty() ? "" : ",") + kv;
  };
  if (spec.interactions) add("interactions=1");
  if (spec.ridge != defaults.ridge) add("ridge=" + format_double(spec.ridge));
  if (spec.max_depth != defaults.max_depth)
    add("max_depth=" + std::to_string(spec.max_depth));
  if (spec.min_leaf != defaults.min_leaf)
    add("min_leaf=" + std::to_string(spec.min_leaf));
  if (spec.n_trees != defaults.n_trees)
    add("n_trees=" + std::to_string(spec.n_trees));
  if (spec.mtry != defaults.mtry) add("mtry=" + std::to_string(spec.mtry));
  if (spec.bootstrap != defaults.bootstrap) add("bootstrap=0");
  if (spec.cv_folds != defaults.cv_folds)
    add("cv_folds=" + std::to_string(spec.cv_folds));
  if (spec.seed != defaults.seed) add("seed=" + std::to_string(spec.seed));

  std::string out = kind_name(spec.kind);
  if (!opts.empty()) out += ":" + opts;
  if (spec.kind == LearnerKind::cv_ensemble && !spec.candidates.empty()) {
    out += "(";
    for (size_t i = 0; i < spec.candidates.size(); ++i) {
      if (i) out += "|";
      out += format_learner_spec(spec.candidates[i]);
    }
    out += ")";
  }
  return out;
}

}  // namespace ipsi

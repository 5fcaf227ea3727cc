#include <cmath>

#include "learners_impl.hpp"

namespace ipsi {
namespace detail {

namespace {

double expit(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& features,
                              bool interactions) {
  const Eigen::MatrixXd expanded =
      interactions ? expand_pairwise(features) : features;
  Eigen::MatrixXd design(expanded.rows(), expanded.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(expanded.cols()) = expanded;
  return design;
}

}  // namespace

Eigen::VectorXd GlmModel::predict_impl(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd design = design_matrix(features, interactions_);
  Eigen::VectorXd eta = design * beta_;
  if (logistic_) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      double p = expit(eta(i));
      eta(i) = std::min(1.0 - kLogisticClip, std::max(kLogisticClip, p));
    }
    return eta;
  }
  if (task() == Task::probability) {
    eta = eta.cwiseMax(0.0).cwiseMin(1.0);
  }
  return eta;
}

ModelPtr fit_glm(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                 const Eigen::VectorXd& targets, Task task) {
  const bool logistic = spec.kind == LearnerKind::logistic;
  const Eigen::MatrixXd design = design_matrix(features, spec.interactions);
  const Eigen::Index p = design.cols();

  if (logistic) {
    require(targets.minCoeff() >= 0.0 && targets.maxCoeff() <= 1.0,
            ErrorCode::pi_out_of_range,
            "logistic learner requires targets in [0,1]");
    // IRLS with a 1e-8 ridge jitter on the Hessian; a step cap keeps the
    // coefficients finite on separable folds, whose predictions are then
    // clipped at prediction time.
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd mu(design.rows()), w(design.rows());
    for (int iter = 0; iter < 100; ++iter) {
      Eigen::VectorXd eta = design * beta;
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        mu(i) = expit(eta(i));
        w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
      }
      Eigen::VectorXd grad = design.transpose() * (targets - mu);
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-8) break;
      Eigen::MatrixXd hess =
          design.transpose() * w.asDiagonal() * design +
          1e-8 * Eigen::MatrixXd::Identity(p, p);
      Eigen::VectorXd step = hess.ldlt().solve(grad);
      double sup = step.lpNorm<Eigen::Infinity>();
      if (sup > 10.0) step *= 10.0 / sup;
      beta += step;
    }
    return std::make_shared<GlmModel>(task, static_cast<int>(features.cols()),
                                      true, spec.interactions,
                                      std::move(beta));
  }

  Eigen::MatrixXd gram = design.transpose() * design;
  const double jitter =
      std::max(spec.ridge, 1e-10 * (gram.diagonal().maxCoeff() + 1.0));
  for (Eigen::Index j = 1; j < p; ++j) gram(j, j) += jitter;
  Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * targets);
  return std::make_shared<GlmModel>(task, static_cast<int>(features.cols()),
                                    false, spec.interactions, std::move(beta));
}

}  // namespace detail
}  // namespace ipsi

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ipsi/dataset.hpp"
#include "ipsi/intervention.hpp"
#include "ipsi/learners.hpp"

namespace ipsi {

// Time-dependent weight W_t = (delta*a + 1 - a) / (delta*pihat + 1 - pihat).
// Total on its domain: the denominator lies in [min(delta,1), max(delta,1)],
// so the weight never blows up even for pihat in {0, 1}.
double ipw_weight(int a, double pihat, double delta);

// V_t = {(1-delta)/delta} * {a*(1-pihat) - (1-a)*delta*pihat};
// identically zero at delta == 1.
double v_weight(int a, double pihat, double delta);

// R_t numerator/denominator collapse:
// {delta*pihat*m1 + (1-pihat)*m0} / {delta*pihat + 1 - pihat},
// a convex combination of m1 and m0.
double pseudo_outcome(double pihat, double m1, double m0, double delta);

// Out-of-fold nuisance predictions, laid out per fold. propensity[k] is
// n x T; m1[k][j] and m0[k][j] are n x T for grid value j. Predictions
// for units in fold k come from models trained outside fold k (K >= 2).
struct NuisanceFits {
  std::vector<Eigen::MatrixXd> propensity;
  std::vector<std::vector<Eigen::MatrixXd>> m1;
  std::vector<std::vector<Eigen::MatrixXd>> m0;
};

// n x |grid| matrix of uncentered influence values phi(Z_i; eta_{-S_i}, delta_j).
using InfluenceMatrix = Eigen::MatrixXd;

inline LearnerSpec default_propensity_learner() {
  LearnerSpec spec;
  spec.kind = LearnerKind::logistic;
  return spec;
}

inline LearnerSpec default_outcome_learner() {
  LearnerSpec spec;
  spec.kind = LearnerKind::linear;
  return spec;
}

struct EstimatorConfig {
  int n_folds = 1;  // 1 = full-sample Z-estimator mode
  LearnerSpec propensity_learner = default_propensity_learner();
  LearnerSpec outcome_learner = default_outcome_learner();
  DeltaGrid grid;
  std::uint64_t seed = 0;
  int threads = 1;
  int max_lag = 0;  // history truncation; 0 = full history
  bool keep_nuisance = false;
  // Forces m_t == 0, reducing the influence function to its weighted term;
  // the efficient estimator then reproduces the IPW estimator exactly.
  bool zero_pseudo_regressions = false;
  // Known propensities (n x T), e.g. a randomized trial: skips the
  // treatment regressions and uses these values in every fold.
  const Eigen::MatrixXd* known_propensity = nullptr;
  // Diagnostic hook replacing the pseudo-regression fits with a fixed
  // function (t, unit, a) -> prediction. With T = 1 this injects a known
  // outcome regression.
  std::function<double(int t, int unit, int a)> outcome_regression_override;
};

struct EfficientEstimate {
  Eigen::VectorXd psi;        // per grid value
  InfluenceMatrix influence;  // n x |grid|
  NuisanceFits nuisance;      // populated when keep_nuisance
};

// Cross-fit influence-function estimator: per fold and grid value, fits
// propensities and the backward pseudo-regression recursion on the
// training folds, evaluates phi = Wtil_T*Y + sum_t Wtil_t*V_t*R_t on the
// held-out fold, and averages the K fold means with equal weight.
EfficientEstimate efficient_estimate(const LongitudinalDataset& data,
                                     const EstimatorConfig& config);

// phi = Wtil_T * Y only.
Eigen::VectorXd ipw_estimate(const LongitudinalDataset& data,
                             const EstimatorConfig& config);

// Sequential g-computation: the time-1 pseudo-outcome collapsed over A_1,
// averaged; no weighting correction terms.
Eigen::VectorXd plugin_estimate(const LongitudinalDataset& data,
                                const EstimatorConfig& config);

struct EstimatorRequest {
  bool efficient = true;
  bool ipw = false;
  bool plugin = false;
};

struct EstimatorBatch {
  Eigen::VectorXd psi_efficient;
  Eigen::VectorXd psi_ipw;
  Eigen::VectorXd psi_plugin;
  InfluenceMatrix influence;
  NuisanceFits nuisance;
};

// One pass computing any subset of the three estimators on shared
// nuisance fits. Deterministic bit-for-bit given (data, config) for any
// thread count.
EstimatorBatch run_estimators(const LongitudinalDataset& data,
                              const EstimatorConfig& config,
                              const EstimatorRequest& request);

// Audit export: one row per (unit, delta) with columns unit_id,delta,phi.
void write_influence_csv(const LongitudinalDataset& data,
                         const DeltaGrid& grid,
                         const InfluenceMatrix& influence,
                         const std::string& path);

}  // namespace ipsi

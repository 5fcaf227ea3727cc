#pragma once

#include <map>
#include <string>
#include <vector>

#include "ipsi/dataset.hpp"
#include "ipsi/inference.hpp"
#include "ipsi/intervention.hpp"

namespace ipsi {

// Kang & Schafer (2007) covariate transformations; the misspecified arms
// hand these to the learners while the data-generating laws stay on the
// raw covariates.
Eigen::Vector4d transform_covariates(const Eigen::Vector4d& x);

// Draw a dataset from any Dgp; covariates recorded through
// dgp.recorded_covariates.
LongitudinalDataset simulate_dataset(const Dgp& dgp, int n,
                                     std::uint64_t seed);

// The T = 1 benchmark draw: standard normal 4-vector covariates,
// expit(-x1 + 0.5 x2 - 0.25 x3 - 0.1 x4) treatment probability, outcome
// N(200 + a*(10 + 13.7*(2x1+x2+x3+x4)), 1). `transformed` records the
// Kang-Schafer transformed covariates instead of the raw ones.
LongitudinalDataset simulate_kang_schafer(int n, std::uint64_t seed,
                                          bool transformed = false);

enum class NuisanceMode {
  correct_parametric,
  misspecified_parametric,
  nonparametric_x,
  nonparametric_xstar,
};

NuisanceMode parse_nuisance_mode(const std::string& name);
std::string nuisance_mode_name(NuisanceMode mode);

struct SimConfig {
  int n = 1000;
  int reps = 500;
  int rep_begin = 0;  // absolute index of the first replication
  DeltaGrid grid;
  NuisanceMode mode = NuisanceMode::correct_parametric;
  std::string dgp = "kang-schafer";
  bool run_efficient = true;
  bool run_ipw = false;
  bool run_plugin = false;
  int n_folds = 0;  // 0: 1 for parametric modes, 2 for nonparametric
  double alpha = 0.05;
  long long bootstrap_reps = 10000;
  bool with_band = true;  // metrics-only runs can skip the bootstrap
  std::uint64_t seed = 1;
  long long oracle_draws = 1'000'000;
  int forest_trees = 100;  // ensemble forest size in nonparametric arms
  int threads = 1;
};

struct EstimatorMetrics {
  double integrated_bias = 0.0;
  double integrated_rmse = 0.0;
};

// bias = (1/I) sum_i | mean_j psi_hat_j(d_i) - psi(d_i) |
// rmse = (sqrt(n)/I) sum_i [ mean_j {psi_hat_j(d_i) - psi(d_i)}^2 ]^{1/2}
EstimatorMetrics integrated_metrics(const Eigen::MatrixXd& estimates,
                                    const Eigen::VectorXd& truth, int n);

struct RepRecord {
  int rep = 0;
  bool covered = false;
  double c_alpha = 0.0;
  double p_value = 1.0;
  double median_half_width = 0.0;
  Eigen::VectorXd psi_efficient, psi_ipw, psi_plugin;
};

struct SimReport {
  std::vector<double> truth;
  double truth_mc_se_max = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double rejection_rate = 0.0;  // share of reps with p_value < alpha
  double median_half_width = 0.0;
  bool oracle_precision_ok = true;  // mc se < half-width / 20
  std::map<std::string, EstimatorMetrics> metrics;
  std::vector<RepRecord> records;
};

// The coverage/metrics experiment: per replication simulates a dataset,
// runs the requested estimators with mode-specific learners, builds the
// uniform band, and records whether it contains the oracle truth at every
// grid value. Per-replication seeds are counter-based from the master
// seed, so partial runs (rep_begin > 0) compose into the full run.
SimReport coverage_experiment(const SimConfig& config);

// Mode wiring used by the experiment, exposed for the CLI and tests.
struct ModeLearners {
  LearnerSpec propensity;
  LearnerSpec outcome;
  int n_folds = 1;
};
ModeLearners mode_learners(NuisanceMode mode, int forest_trees);

void write_sim_report_csv(const SimConfig& config, const SimReport& report,
                          const std::string& path);
void write_sim_records_csv(const SimConfig& config, const SimReport& report,
                           const std::string& path);

}  // namespace ipsi

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ipsi/estimators.hpp"
#include "ipsi/intervention.hpp"

namespace ipsi {

// Exact standard normal quantile (Wichura's AS 241 algorithm).
double normal_quantile(double p);

// Type-7 empirical quantile on sorted values: h = (n-1)p, linear
// interpolation between the bracketing order statistics. Fixed here so
// critical values are reproducible bit-exactly from the same draws.
double quantile_type7(const std::vector<double>& sorted_values, double p);

// sigma^2(delta_j) = (1/n) * sum_i {phi_ij - psi_j}^2.
Eigen::VectorXd variance_hat(const InfluenceMatrix& influence,
                             const Eigen::VectorXd& psi_hat);

struct PointwiseBand {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// psi +- z_{1-alpha/2} * sigma / sqrt(n).
PointwiseBand pointwise_ci(const Eigen::VectorXd& psi_hat,
                           const Eigen::VectorXd& sigma_hat, int n,
                           double alpha);

enum class MultiplierKind { rademacher, gaussian };

struct BootstrapResult {
  double c_alpha = 0.0;
  std::vector<double> sup_draws;  // one per replication, unsorted
};

// For each replication draws iid multipliers xi and records
//   sup_j | sqrt(n) * mean_i[ xi_i * (phi_ij - psi_j) / sigma_j ] |;
// c_alpha is the type-7 (1-alpha) quantile of those sup draws.
// Deterministic given seed for any thread count.
BootstrapResult multiplier_bootstrap(const InfluenceMatrix& influence,
                                     const Eigen::VectorXd& psi_hat,
                                     const Eigen::VectorXd& sigma_hat,
                                     long long replications, double alpha,
                                     std::uint64_t seed,
                                     MultiplierKind kind = MultiplierKind::rademacher,
                                     int threads = 1);

// Smallest c >= 0 such that a horizontal line fits inside the band
// psi +- c*sigma/sqrt(n); +infinity when some flat-impossible pair has
// zero total sigma. Closed form over the finite grid:
//   max over pairs (j,k) of sqrt(n) * (psi_k - psi_j) / (sigma_j + sigma_k).
double no_effect_threshold(const Eigen::VectorXd& psi_hat,
                           const Eigen::VectorXd& sigma_hat, int n);

// Fraction of bootstrap sup draws at or above the no-effect threshold.
double no_effect_pvalue(const Eigen::VectorXd& psi_hat,
                        const Eigen::VectorXd& sigma_hat, int n,
                        const std::vector<double>& sup_draws);

struct EffectCurve {
  DeltaGrid grid;
  Eigen::VectorXd psi;    // point estimates
  Eigen::VectorXd sigma;  // sqrt of variance_hat
  Eigen::VectorXd pt_lo, pt_hi;
  Eigen::VectorXd unif_lo, unif_hi;
  double alpha = 0.05;
  double c_alpha = 0.0;
  double p_value = 1.0;
  int n = 0;
  long long bootstrap_reps = 0;
  std::uint64_t seed = 0;
};

EffectCurve make_effect_curve(const InfluenceMatrix& influence,
                              const Eigen::VectorXd& psi_hat,
                              const DeltaGrid& grid, double alpha,
                              long long replications, std::uint64_t seed,
                              MultiplierKind kind = MultiplierKind::rademacher,
                              int threads = 1);

// delta,est,se,pt_lo,pt_hi,unif_lo,unif_hi
void write_curve_csv(const EffectCurve& curve, const std::string& path);
// alpha,c_alpha,p_value,n,B,seed
void write_curve_summary(const EffectCurve& curve, const std::string& path);

}  // namespace ipsi

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ipsi/errors.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

// Odds-multiplier shift of a propensity score:
//   q = delta * pi / (delta * pi + 1 - pi).
// Fixed points at pi in {0, 1}; for 0 < pi < 1 the odds of q are exactly
// delta times the odds of pi.
double shift_propensity(double pi, double delta);

// Denominator delta*pi + 1 - pi, evaluated as 1 + (delta-1)*pi so that
// delta == 1 yields exactly 1. Always in [min(delta,1), max(delta,1)].
inline double shift_denominator(double pi, double delta) {
  return 1.0 + (delta - 1.0) * pi;
}

struct DeltaGrid {
  std::vector<double> values;  // strictly increasing, all positive
  double lower = 0.0;          // configured bounds [lower, upper]
  double upper = 0.0;

  int size() const { return static_cast<int>(values.size()); }
  void validate() const;
};

// Geometrically spaced grid with both endpoints included.
DeltaGrid log_delta_grid(double min, double max, int points);

struct Trajectory {
  std::vector<Eigen::VectorXd> x;  // x_1..x_t
  std::vector<int> a;              // a_1..a_{t-1} (or a_1..a_T when complete)
};

// A synthetic data-generating process over T timepoints. Implementations
// must be deterministic functions of the supplied Rng.
class Dgp {
 public:
  virtual ~Dgp() = default;
  virtual std::string name() const = 0;
  virtual int horizon() const = 0;        // T
  virtual int covariate_dim() const = 0;  // per-time covariate dimension
  // Draw x_t given x_1..x_{t-1}, a_1..a_{t-1}.
  virtual Eigen::VectorXd draw_covariates(int t, const Trajectory& past,
                                          Rng& rng) const = 0;
  // pi_t(h_t) with h_t = (x_1..x_t, a_1..a_{t-1}); traj.x has t entries.
  virtual double propensity(int t, const Trajectory& traj) const = 0;
  // mu(h_T, a_T); traj holds the full trajectory including a_T.
  virtual double outcome_mean(const Trajectory& traj) const = 0;
  virtual double outcome_sd() const = 0;
  // Covariates recorded into generated datasets; a misspecification hook
  // (the treatment/outcome laws always act on the raw x).
  virtual Eigen::VectorXd recorded_covariates(const Eigen::VectorXd& x) const {
    return x;
  }
};

// Presets addressable from the CLI: "kang-schafer",
// "kang-schafer-transformed", "flat".
std::unique_ptr<Dgp> make_dgp(const std::string& name);

struct OracleEstimate {
  double value = 0.0;
  double mc_se = 0.0;
};

// Monte Carlo evaluation of the g-formula value psi(delta) under `dgp`.
// T = 1 averages the closed-form integrand q*mu1 + (1-q)*mu0 over
// covariate draws; T > 1 simulates the intervened trajectory forward with
// A_t ~ Bernoulli(q_t). Deterministic given (dgp, delta, n_mc, seed) for
// any thread count.
OracleEstimate oracle_psi(const Dgp& dgp, double delta, long long n_mc,
                          std::uint64_t seed, int threads = 1);

}  // namespace ipsi

#include "ipsi/intervention.hpp"

#include <algorithm>
#include <cmath>

#include "ipsi/parallel.hpp"

namespace ipsi {

double shift_propensity(double pi, double delta) {
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::delta_non_positive,
          "delta must be a positive finite number");
  require(pi >= 0.0 && pi <= 1.0, ErrorCode::pi_out_of_range,
          "propensity must lie in [0,1]");
  return delta * pi / shift_denominator(pi, delta);
}

void DeltaGrid::validate() const {
  require(!values.empty(), ErrorCode::invalid_bounds, "empty delta grid");
  require(lower > 0.0 && std::isfinite(upper) && lower <= upper,
          ErrorCode::invalid_bounds, "delta bounds must satisfy 0 < lo <= hi");
  double prev = 0.0;
  for (double d : values) {
    require(std::isfinite(d) && d > 0.0, ErrorCode::delta_non_positive,
            "delta values must be positive and finite");
    require(d > prev, ErrorCode::invalid_bounds,
            "delta values must be strictly increasing");
    require(d >= lower && d <= upper, ErrorCode::delta_out_of_bounds,
            "delta value outside configured bounds");
    prev = d;
  }
}

DeltaGrid log_delta_grid(double min, double max, int points) {
  require(min > 0.0 && std::isfinite(max) && min <= max,
          ErrorCode::invalid_bounds,
          "log_delta_grid needs 0 < min <= max < infinity");
  require(points >= 1, ErrorCode::invalid_bounds,
          "log_delta_grid needs at least one point");
  require(points >= 2 || min == max, ErrorCode::invalid_bounds,
          "a single-point grid requires min == max");

  DeltaGrid grid;
  grid.lower = min;
  grid.upper = max;
  grid.values.resize(static_cast<size_t>(points));
  const double log_lo = std::log(min);
  const double log_hi = std::log(max);
  for (int i = 0; i < points; ++i)
    grid.values[static_cast<size_t>(i)] =
        std::exp(log_lo + (log_hi - log_lo) * i / (points - 1.0));
  grid.values.front() = min;  // endpoints exact
  grid.values.back() = max;
  grid.validate();
  return grid;
}

// Covariate transformations of Kang & Schafer (2007, Statist. Sci. 22(4),
// 523-539), used to emit misspecified analysis covariates. Declared in
// simulation.hpp.
Eigen::Vector4d transform_covariates(const Eigen::Vector4d& x) {
  Eigen::Vector4d z;
  z(0) = std::exp(x(0) / 2.0);
  z(1) = x(1) / (1.0 + std::exp(x(0))) + 10.0;
  z(2) = std::pow(x(0) * x(2) / 25.0 + 0.6, 3.0);
  z(3) = std::pow(x(1) + x(3) + 20.0, 2.0);
  return z;
}

namespace {

double expit(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// T = 1 benchmark of Kang & Schafer (2007): standard normal covariates,
// variable propensities, outcome mean 200 + a*(10 + 13.7*(2x1+x2+x3+x4)).
class KangSchaferDgp : public Dgp {
 public:
  explicit KangSchaferDgp(bool transformed) : transformed_(transformed) {}

  std::string name() const override {
    return transformed_ ? "kang-schafer-transformed" : "kang-schafer";
  }
  int horizon() const override { return 1; }
  int covariate_dim() const override { return 4; }

  Eigen::VectorXd draw_covariates(int, const Trajectory&,
                                  Rng& rng) const override {
    Eigen::VectorXd x(4);
    for (int j = 0; j < 4; ++j) x(j) = rng.normal();
    return x;
  }

  double propensity(int, const Trajectory& traj) const override {
    const Eigen::VectorXd& x = traj.x.front();
    return expit(-x(0) + 0.5 * x(1) - 0.25 * x(2) - 0.1 * x(3));
  }

  double outcome_mean(const Trajectory& traj) const override {
    const Eigen::VectorXd& x = traj.x.front();
    const double a = traj.a.front();
    return 200.0 + a * (10.0 + 13.7 * (2.0 * x(0) + x(1) + x(2) + x(3)));
  }

  double outcome_sd() const override { return 1.0; }

  Eigen::VectorXd recorded_covariates(const Eigen::VectorXd& x) const override {
    if (!transformed_) return x;
    return transform_covariates(Eigen::Vector4d(x));
  }

 private:
  bool transformed_;
};

// Same covariate and treatment laws as Kang-Schafer but an outcome mean
// that ignores treatment, so psi(delta) is constant in delta.
class FlatDgp : public KangSchaferDgp {
 public:
  FlatDgp() : KangSchaferDgp(false) {}
  std::string name() const override { return "flat"; }
  double outcome_mean(const Trajectory& traj) const override {
    const Eigen::VectorXd& x = traj.x.front();
    return 200.0 + 13.7 * (2.0 * x(0) + x(1) + x(2) + x(3));
  }
};

}  // namespace

std::unique_ptr<Dgp> make_dgp(const std::string& name) {
  if (name == "kang-schafer") return std::make_unique<KangSchaferDgp>(false);
  if (name == "kang-schafer-transformed")
    return std::make_unique<KangSchaferDgp>(true);
  if (name == "flat") return std::make_unique<FlatDgp>();
  fail(ErrorCode::unknown_dgp, "unknown dgp '" + name + "'");
}

OracleEstimate oracle_psi(const Dgp& dgp, double delta, long long n_mc,
                          std::uint64_t seed, int threads) {
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::delta_non_positive,
          "delta must be a positive finite number");
  require(n_mc >= 1, ErrorCode::invalid_config, "n_mc must be >= 1");

  const int t_max = dgp.horizon();
  constexpr long long kChunk = 8192;
  const long long n_chunks = (n_mc + kChunk - 1) / kChunk;
  std::vector<double> sums(static_cast<size_t>(n_chunks), 0.0);
  std::vector<double> sq_sums(static_cast<size_t>(n_chunks), 0.0);

  parallel_for(n_chunks, threads, [&](std::int64_t c) {
    Rng rng(derive_seed(seed, {0x6f7261636cULL, static_cast<std::uint64_t>(c)}));
    const long long begin = c * kChunk;
    const long long end = std::min(n_mc, begin + kChunk);
    double sum = 0.0, sq = 0.0;
    Trajectory traj;
    for (long long i = begin; i < end; ++i) {
      traj.x.clear();
      traj.a.clear();
      double value;
      if (t_max == 1) {
        // Rao-Blackwellized point-exposure integrand.
        traj.x.push_back(dgp.draw_covariates(1, traj, rng));
        const double pi = dgp.propensity(1, traj);
        const double q = delta * pi / shift_denominator(pi, delta);
        traj.a.push_back(1);
        const double mu1 = dgp.outcome_mean(traj);
        traj.a.back() = 0;
        const double mu0 = dgp.outcome_mean(traj);
        value = q * mu1 + (1.0 - q) * mu0;
      } else {
        for (int t = 1; t <= t_max; ++t) {
          traj.x.push_back(dgp.draw_covariates(t, traj, rng));
          const double pi = dgp.propensity(t, traj);
          const double q = delta * pi / shift_denominator(pi, delta);
          traj.a.push_back(rng.bernoulli(q) ? 1 : 0);
        }
        value = dgp.outcome_mean(traj);
      }
      sum += value;
      sq += value * value;
    }
    sums[static_cast<size_t>(c)] = sum;
    sq_sums[static_cast<size_t>(c)] = sq;
  });

  double total = 0.0, total_sq = 0.0;
  for (long long c = 0; c < n_chunks; ++c) {
    total += sums[static_cast<size_t>(c)];
    total_sq += sq_sums[static_cast<size_t>(c)];
  }
  OracleEstimate est;
  const double n = static_cast<double>(n_mc);
  est.value = total / n;
  if (n_mc > 1) {
    double var = (total_sq - n * est.value * est.value) / (n - 1.0);
    est.mc_se = std::sqrt(std::max(0.0, var) / n);
  }
  return est;
}

}  // namespace ipsi

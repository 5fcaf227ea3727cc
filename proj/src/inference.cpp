#include "ipsi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ipsi/dataset.hpp"
#include "ipsi/parallel.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

// AS 241 (Wichura 1988), double-precision branch: max absolute error
// around 1e-15 over (0, 1).
double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::invalid_config,
          "normal quantile needs p in (0,1)");
  const double q = p - 0.5;
  double r, val;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    val = q *
          (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                67265.770927008700853) * r + 45921.953931549871457) * r +
              13731.693765509461125) * r + 1971.5909503065514427) * r +
            133.14166789178437745) * r + 3.387132872796366608) /
          (((((((5226.495278852545703 * r + 28729.085735721942674) * r +
                39307.89580009271061) * r + 21213.794301586595867) * r +
              5394.1960214247511077) * r + 687.1870074920579083) * r +
            42.313330701600911252) * r + 1.0);
    return val;
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double quantile_type7(const std::vector<double>& sorted_values, double p) {
  require(!sorted_values.empty(), ErrorCode::invalid_config,
          "quantile of an empty sample");
  require(p >= 0.0 && p <= 1.0, ErrorCode::invalid_config,
          "quantile needs p in [0,1]");
  const size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  const double h = static_cast<double>(n - 1) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted_values[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

Eigen::VectorXd variance_hat(const InfluenceMatrix& influence,
                             const Eigen::VectorXd& psi_hat) {
  const Eigen::Index n = influence.rows();
  require(n >= 2, ErrorCode::too_few_units,
          "variance estimation needs at least two units");
  require(influence.cols() == psi_hat.size(), ErrorCode::dimension_mismatch,
          "influence columns must match psi length");
  Eigen::VectorXd out(psi_hat.size());
  for (Eigen::Index j = 0; j < psi_hat.size(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = influence(i, j) - psi_hat(j);
      acc += d * d;
    }
    out(j) = acc / static_cast<double>(n);
  }
  return out;
}

PointwiseBand pointwise_ci(const Eigen::VectorXd& psi_hat,
                           const Eigen::VectorXd& sigma_hat, int n,
                           double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_config,
          "alpha must lie in (0,1)");
  require(psi_hat.size() == sigma_hat.size(), ErrorCode::dimension_mismatch,
          "psi and sigma lengths differ");
  require(n >= 1, ErrorCode::too_few_units, "n must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double scale = z / std::sqrt(static_cast<double>(n));
  PointwiseBand band;
  band.lo = psi_hat - scale * sigma_hat;
  band.hi = psi_hat + scale * sigma_hat;
  return band;
}

BootstrapResult multiplier_bootstrap(const InfluenceMatrix& influence,
                                     const Eigen::VectorXd& psi_hat,
                                     const Eigen::VectorXd& sigma_hat,
                                     long long replications, double alpha,
                                     std::uint64_t seed, MultiplierKind kind,
                                     int threads) {
  require(replications >= 1, ErrorCode::invalid_b,
          "bootstrap needs at least one replication");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_config,
          "alpha must lie in (0,1)");
  require(influence.cols() == psi_hat.size() &&
              psi_hat.size() == sigma_hat.size(),
          ErrorCode::dimension_mismatch, "grid dimensions disagree");
  require(sigma_hat.minCoeff() > 0.0, ErrorCode::zero_variance,
          "multiplier bootstrap needs sigma > 0 at every grid value");

  const Eigen::Index n = influence.rows();
  Eigen::MatrixXd standardized = influence;
  standardized.rowwise() -= psi_hat.transpose();
  standardized.array().rowwise() /= sigma_hat.transpose().array();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  BootstrapResult result;
  result.sup_draws.resize(static_cast<size_t>(replications));
  parallel_for(replications, threads, [&](std::int64_t b) {
    Rng rng(derive_seed(seed, {0x626f6f74ULL, static_cast<std::uint64_t>(b)}));
    Eigen::VectorXd xi(n);
    if (kind == MultiplierKind::rademacher) {
      for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.rademacher();
    } else {
      for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.normal();
    }
    result.sup_draws[static_cast<size_t>(b)] =
        (standardized.transpose() * xi).cwiseAbs().maxCoeff() * inv_sqrt_n;
  });

  std::vector<double> sorted = result.sup_draws;
  std::sort(sorted.begin(), sorted.end());
  result.c_alpha = quantile_type7(sorted, 1.0 - alpha);
  return result;
}

double no_effect_threshold(const Eigen::VectorXd& psi_hat,
                           const Eigen::VectorXd& sigma_hat, int n) {
  require(psi_hat.size() == sigma_hat.size(), ErrorCode::dimension_mismatch,
          "psi and sigma lengths differ");
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  double c_star = 0.0;
  for (Eigen::Index j = 0; j < psi_hat.size(); ++j) {
    for (Eigen::Index k = 0; k < psi_hat.size(); ++k) {
      const double gap = psi_hat(k) - psi_hat(j);
      if (gap <= 0.0) continue;
      const double denom = sigma_hat(j) + sigma_hat(k);
      if (denom == 0.0) return std::numeric_limits<double>::infinity();
      c_star = std::max(c_star, sqrt_n * gap / denom);
    }
  }
  return c_star;
}

double no_effect_pvalue(const Eigen::VectorXd& psi_hat,
                        const Eigen::VectorXd& sigma_hat, int n,
                        const std::vector<double>& sup_draws) {
  const double c_star = no_effect_threshold(psi_hat, sigma_hat, n);
  if (std::isinf(c_star)) return 0.0;
  if (sup_draws.empty()) return 1.0;
  long long count = 0;
  for (double s : sup_draws)
    if (s >= c_star) ++count;
  return static_cast<double>(count) / static_cast<double>(sup_draws.size());
}

EffectCurve make_effect_curve(const InfluenceMatrix& influence,
                              const Eigen::VectorXd& psi_hat,
                              const DeltaGrid& grid, double alpha,
                              long long replications, std::uint64_t seed,
                              MultiplierKind kind, int threads) {
  require(grid.size() == static_cast<int>(psi_hat.size()),
          ErrorCode::dimension_mismatch, "grid and psi lengths differ");
  EffectCurve curve;
  curve.grid = grid;
  curve.psi = psi_hat;
  curve.sigma = variance_hat(influence, psi_hat).cwiseSqrt();
  curve.n = static_cast<int>(influence.rows());
  curve.alpha = alpha;
  curve.bootstrap_reps = replications;
  curve.seed = seed;

  PointwiseBand pt = pointwise_ci(psi_hat, curve.sigma, curve.n, alpha);
  curve.pt_lo = std::move(pt.lo);
  curve.pt_hi = std::move(pt.hi);

  BootstrapResult boot = multiplier_bootstrap(
      influence, psi_hat, curve.sigma, replications, alpha, seed, kind, threads);
  curve.c_alpha = boot.c_alpha;
  const double scale = boot.c_alpha / std::sqrt(static_cast<double>(curve.n));
  curve.unif_lo = psi_hat - scale * curve.sigma;
  curve.unif_hi = psi_hat + scale * curve.sigma;
  curve.p_value = no_effect_pvalue(psi_hat, curve.sigma, curve.n, boot.sup_draws);
  return curve;
}

void write_curve_csv(const EffectCurve& curve, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << "delta,est,se,pt_lo,pt_hi,unif_lo,unif_hi\n";
  for (int j = 0; j < curve.grid.size(); ++j) {
    out << format_double(curve.grid.values[static_cast<size_t>(j)]) << ','
        << format_double(curve.psi(j)) << ',' << format_double(curve.sigma(j))
        << ',' << format_double(curve.pt_lo(j)) << ','
        << format_double(curve.pt_hi(j)) << ','
        << format_double(curve.unif_lo(j)) << ','
        << format_double(curve.unif_hi(j)) << '\n';
  }
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

void write_curve_summary(const EffectCurve& curve, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << "alpha,c_alpha,p_value,n,B,seed\n";
  out << format_double(curve.alpha) << ',' << format_double(curve.c_alpha)
      << ',' << format_double(curve.p_value) << ',' << curve.n << ','
      << curve.bootstrap_reps << ',' << curve.seed << '\n';
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

}  // namespace ipsi

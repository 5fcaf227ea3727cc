#include "ipsi/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ipsi/estimators.hpp"
#include "ipsi/parallel.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

LongitudinalDataset simulate_dataset(const Dgp& dgp, int n,
                                     std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_config, "need at least one unit");
  const int t_max = dgp.horizon();

  LongitudinalDataset data;
  data.n_units = n;
  data.n_times = t_max;
  data.unit_ids.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) data.unit_ids.push_back(std::to_string(i + 1));
  data.treatment.resize(n, t_max);
  data.outcome.resize(n);
  data.outcome_by_time.resize(n, t_max);

  // Record dimension comes from the recorded view, which may differ from
  // the raw state dimension in transformed arms.
  std::vector<Eigen::MatrixXd> recorded;

  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {0x64617461ULL, static_cast<std::uint64_t>(i)}));
    Trajectory traj;
    for (int t = 1; t <= t_max; ++t) {
      Eigen::VectorXd x = dgp.draw_covariates(t, traj, rng);
      traj.x.push_back(x);
      const double pi = dgp.propensity(t, traj);
      const int a = rng.bernoulli(pi) ? 1 : 0;
      traj.a.push_back(a);
      data.treatment(i, t - 1) = a;
      Eigen::VectorXd rec = dgp.recorded_covariates(x);
      if (static_cast<int>(recorded.size()) < t)
        recorded.emplace_back(n, rec.size());
      recorded[static_cast<size_t>(t - 1)].row(i) = rec.transpose();
    }
    const double y = dgp.outcome_mean(traj) + dgp.outcome_sd() * rng.normal();
    data.outcome(i) = y;
    data.outcome_by_time.row(i).setConstant(y);
  }
  data.covariates = std::move(recorded);
  const int p = static_cast<int>(data.covariates.front().cols());
  for (int j = 0; j < p; ++j)
    data.covariate_names.push_back("x" + std::to_string(j + 1));
  data.validate();
  return data;
}

LongitudinalDataset simulate_kang_schafer(int n, std::uint64_t seed,
                                          bool transformed) {
  auto dgp = make_dgp(transformed ? "kang-schafer-transformed" : "kang-schafer");
  return simulate_dataset(*dgp, n, seed);
}

NuisanceMode parse_nuisance_mode(const std::string& name) {
  if (name == "cor-p" || name == "correct-parametric")
    return NuisanceMode::correct_parametric;
  if (name == "mis-p" || name == "misspecified-parametric")
    return NuisanceMode::misspecified_parametric;
  if (name == "np-x" || name == "nonparametric-x")
    return NuisanceMode::nonparametric_x;
  if (name == "np-xstar" || name == "nonparametric-xstar")
    return NuisanceMode::nonparametric_xstar;
  fail(ErrorCode::invalid_config, "unknown nuisance mode '" + name + "'");
}

std::string nuisance_mode_name(NuisanceMode mode) {
  switch (mode) {
    case NuisanceMode::correct_parametric: return "correct-parametric";
    case NuisanceMode::misspecified_parametric:
      return "misspecified-parametric";
    case NuisanceMode::nonparametric_x: return "nonparametric-x";
    case NuisanceMode::nonparametric_xstar: return "nonparametric-xstar";
  }
  return "?";
}

EstimatorMetrics integrated_metrics(const Eigen::MatrixXd& estimates,
                                    const Eigen::VectorXd& truth, int n) {
  require(estimates.cols() == truth.size(), ErrorCode::dimension_mismatch,
          "estimate columns must match truth length");
  require(estimates.rows() >= 1, ErrorCode::dimension_mismatch,
          "need at least one replication");
  const Eigen::Index reps = estimates.rows();
  const Eigen::Index grid = estimates.cols();
  double bias_acc = 0.0, rmse_acc = 0.0;
  for (Eigen::Index i = 0; i < grid; ++i) {
    double mean_err = 0.0, sq_err = 0.0;
    for (Eigen::Index j = 0; j < reps; ++j) {
      const double err = estimates(j, i) - truth(i);
      mean_err += err;
      sq_err += err * err;
    }
    bias_acc += std::fabs(mean_err / static_cast<double>(reps));
    rmse_acc += std::sqrt(sq_err / static_cast<double>(reps));
  }
  EstimatorMetrics metrics;
  metrics.integrated_bias = bias_acc / static_cast<double>(grid);
  metrics.integrated_rmse = std::sqrt(static_cast<double>(n)) * rmse_acc /
                            static_cast<double>(grid);
  return metrics;
}

ModeLearners mode_learners(NuisanceMode mode, int forest_trees) {
  ModeLearners out;
  switch (mode) {
    case NuisanceMode::correct_parametric:
    case NuisanceMode::misspecified_parametric: {
      out.propensity.kind = LearnerKind::logistic;
      out.outcome.kind = LearnerKind::linear;
      out.outcome.interactions = true;
      out.n_folds = 1;
      break;
    }
    case NuisanceMode::nonparametric_x:
    case NuisanceMode::nonparametric_xstar: {
      out.propensity.kind = LearnerKind::cv_ensemble;
      out.propensity.candidates =
          default_candidates(Task::probability, forest_trees);
      out.outcome.kind = LearnerKind::cv_ensemble;
      out.outcome.candidates =
          default_candidates(Task::regression, forest_trees);
      out.n_folds = 2;
      break;
    }
  }
  return out;
}

namespace {

bool mode_uses_transformed(NuisanceMode mode) {
  return mode == NuisanceMode::misspecified_parametric ||
         mode == NuisanceMode::nonparametric_xstar;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

SimReport coverage_experiment(const SimConfig& config) {
  require(config.reps >= 1, ErrorCode::invalid_config, "reps must be >= 1");
  config.grid.validate();
  std::string dgp_name = config.dgp;
  if (mode_uses_transformed(config.mode)) {
    require(dgp_name == "kang-schafer", ErrorCode::invalid_config,
            "transformed nuisance modes require the kang-schafer dgp");
    dgp_name = "kang-schafer-transformed";
  }
  auto dgp = make_dgp(dgp_name);

  SimReport report;

  // Oracle truth, once per grid.
  report.truth.resize(static_cast<size_t>(config.grid.size()));
  for (int j = 0; j < config.grid.size(); ++j) {
    OracleEstimate est = oracle_psi(
        *dgp, config.grid.values[static_cast<size_t>(j)], config.oracle_draws,
        derive_seed(config.seed, {0x747275ULL, static_cast<std::uint64_t>(j)}),
        config.threads);
    report.truth[static_cast<size_t>(j)] = est.value;
    report.truth_mc_se_max = std::max(report.truth_mc_se_max, est.mc_se);
  }

  const ModeLearners learners =
      mode_learners(config.mode, config.forest_trees);
  const int n_folds = config.n_folds > 0 ? config.n_folds : learners.n_folds;

  report.records.resize(static_cast<size_t>(config.reps));
  parallel_for(config.reps, config.threads, [&](std::int64_t r) {
    const int rep = config.rep_begin + static_cast<int>(r);
    LongitudinalDataset data = simulate_dataset(
        *dgp, config.n,
        derive_seed(config.seed, {0x726570ULL, static_cast<std::uint64_t>(rep)}));

    EstimatorConfig est;
    est.n_folds = n_folds;
    est.propensity_learner = learners.propensity;
    est.outcome_learner = learners.outcome;
    est.grid = config.grid;
    est.seed = derive_seed(config.seed,
                           {0x657374ULL, static_cast<std::uint64_t>(rep)});
    est.threads = 1;  // replications are the parallel axis

    EstimatorRequest request;
    request.efficient = config.run_efficient || config.with_band;
    request.ipw = config.run_ipw;
    request.plugin = config.run_plugin;
    EstimatorBatch batch = run_estimators(data, est, request);

    RepRecord& record = report.records[static_cast<size_t>(r)];
    record.rep = rep;
    if (request.efficient) record.psi_efficient = batch.psi_efficient;
    if (request.ipw) record.psi_ipw = batch.psi_ipw;
    if (request.plugin) record.psi_plugin = batch.psi_plugin;

    if (config.with_band) {
      EffectCurve curve = make_effect_curve(
          batch.influence, batch.psi_efficient, config.grid, config.alpha,
          config.bootstrap_reps,
          derive_seed(config.seed, {0x6273ULL, static_cast<std::uint64_t>(rep)}),
          MultiplierKind::rademacher, 1);
      record.c_alpha = curve.c_alpha;
      record.p_value = curve.p_value;
      bool covered = true;
      std::vector<double> widths;
      widths.reserve(static_cast<size_t>(config.grid.size()));
      for (int j = 0; j < config.grid.size(); ++j) {
        const double truth_j = report.truth[static_cast<size_t>(j)];
        if (truth_j < curve.unif_lo(j) || truth_j > curve.unif_hi(j))
          covered = false;
        widths.push_back(0.5 * (curve.unif_hi(j) - curve.unif_lo(j)));
      }
      record.covered = covered;
      record.median_half_width = median_of(std::move(widths));
    }
  });

  // Order-independent aggregation: records live in rep order.
  Eigen::VectorXd truth(config.grid.size());
  for (int j = 0; j < config.grid.size(); ++j)
    truth(j) = report.truth[static_cast<size_t>(j)];
  auto collect = [&](auto member) {
    Eigen::MatrixXd stacked(config.reps, config.grid.size());
    for (int r = 0; r < config.reps; ++r)
      stacked.row(r) = (report.records[static_cast<size_t>(r)].*member)
                           .transpose();
    return stacked;
  };
  if (config.run_efficient || config.with_band)
    report.metrics["efficient"] = integrated_metrics(
        collect(&RepRecord::psi_efficient), truth, config.n);
  if (config.run_ipw)
    report.metrics["ipw"] =
        integrated_metrics(collect(&RepRecord::psi_ipw), truth, config.n);
  if (config.run_plugin)
    report.metrics["plugin"] =
        integrated_metrics(collect(&RepRecord::psi_plugin), truth, config.n);

  if (config.with_band) {
    int covered = 0, rejected = 0;
    std::vector<double> half_widths;
    half_widths.reserve(static_cast<size_t>(config.reps));
    for (const RepRecord& record : report.records) {
      covered += record.covered ? 1 : 0;
      rejected += record.p_value < config.alpha ? 1 : 0;
      half_widths.push_back(record.median_half_width);
    }
    const double reps = static_cast<double>(config.reps);
    report.coverage = covered / reps;
    report.coverage_se =
        std::sqrt(std::max(0.0, report.coverage * (1.0 - report.coverage)) /
                  reps);
    report.rejection_rate = rejected / reps;
    report.median_half_width = median_of(std::move(half_widths));
    report.oracle_precision_ok =
        report.truth_mc_se_max < report.median_half_width / 20.0;
  }
  return report;
}

void write_sim_report_csv(const SimConfig& config, const SimReport& report,
                          const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << "estimator,mode,dgp,n,reps,integrated_bias,integrated_rmse,"
         "coverage,coverage_se,rejection_rate,median_half_width,"
         "truth_mc_se_max,oracle_precision_ok\n";
  for (const auto& [name, metrics] : report.metrics) {
    out << name << ',' << nuisance_mode_name(config.mode) << ',' << config.dgp
        << ',' << config.n << ',' << config.reps << ','
        << format_double(metrics.integrated_bias) << ','
        << format_double(metrics.integrated_rmse) << ',';
    if (name == "efficient" && config.with_band) {
      out << format_double(report.coverage) << ','
          << format_double(report.coverage_se) << ','
          << format_double(report.rejection_rate) << ','
          << format_double(report.median_half_width) << ','
          << format_double(report.truth_mc_se_max) << ','
          << (report.oracle_precision_ok ? 1 : 0);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

void write_sim_records_csv(const SimConfig& config, const SimReport& report,
                           const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << "rep,estimator,covered,c_alpha,p_value";
  for (int j = 0; j < config.grid.size(); ++j)
    out << ",delta_" << format_double(config.grid.values[static_cast<size_t>(j)]);
  out << '\n';
  auto emit = [&](const RepRecord& record, const std::string& name,
                  const Eigen::VectorXd& psi) {
    if (psi.size() == 0) return;
    out << record.rep << ',' << name << ',' << (record.covered ? 1 : 0) << ','
        << format_double(record.c_alpha) << ','
        << format_double(record.p_value);
    for (Eigen::Index j = 0; j < psi.size(); ++j)
      out << ',' << format_double(psi(j));
    out << '\n';
  };
  for (const RepRecord& record : report.records) {
    emit(record, "efficient", record.psi_efficient);
    emit(record, "ipw", record.psi_ipw);
    emit(record, "plugin", record.psi_plugin);
  }
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

}  // namespace ipsi

#include "ipsi/estimators.hpp"

#include <cmath>
#include <fstream>

#include "ipsi/parallel.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

double ipw_weight(int a, double pihat, double delta) {
  return (delta * a + 1.0 - a) / shift_denominator(pihat, delta);
}

double v_weight(int a, double pihat, double delta) {
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::delta_non_positive,
          "delta must be a positive finite number");
  return (1.0 - delta) / delta * (a * (1.0 - pihat) - (1.0 - a) * delta * pihat);
}

double pseudo_outcome(double pihat, double m1, double m0, double delta) {
  return (delta * pihat * m1 + (1.0 - pihat) * m0) /
         shift_denominator(pihat, delta);
}

namespace {

// Seed-stream tags so learner fits in different roles never collide.
constexpr std::uint64_t kFoldTag = 0x69707369ULL;
constexpr std::uint64_t kPropTag = 1;
constexpr std::uint64_t kOutcomeTag = 2;

struct EngineWorkspace {
  std::vector<Eigen::MatrixXd> history;           // per t: n x d_t
  std::vector<Eigen::MatrixXd> outcome_features;  // per t: [history, a_t]
  std::vector<Eigen::MatrixXd> features_a1;       // a_t column forced to 1
  std::vector<Eigen::MatrixXd> features_a0;       // a_t column forced to 0
};

EngineWorkspace build_workspace(const LongitudinalDataset& data, int max_lag) {
  EngineWorkspace ws;
  const int t_max = data.n_times;
  ws.history.reserve(static_cast<size_t>(t_max));
  ws.outcome_features.reserve(static_cast<size_t>(t_max));
  for (int t = 1; t <= t_max; ++t) {
    Eigen::MatrixXd hist = build_history(data, t, max_lag).values;
    Eigen::MatrixXd feat(hist.rows(), hist.cols() + 1);
    feat.leftCols(hist.cols()) = hist;
    feat.col(hist.cols()) = data.treatment.col(t - 1).cast<double>();
    ws.history.push_back(std::move(hist));
    Eigen::MatrixXd feat1 = feat;
    feat1.col(feat.cols() - 1).setOnes();
    Eigen::MatrixXd feat0 = feat;
    feat0.col(feat.cols() - 1).setZero();
    ws.outcome_features.push_back(std::move(feat));
    ws.features_a1.push_back(std::move(feat1));
    ws.features_a0.push_back(std::move(feat0));
  }
  return ws;
}

double mean_over(const Eigen::VectorXd& values, const std::vector<int>& rows) {
  double sum = 0.0;
  for (int r : rows) sum += values(r);
  return sum / static_cast<double>(rows.size());
}

}  // namespace

EstimatorBatch run_estimators(const LongitudinalDataset& data,
                              const EstimatorConfig& config,
                              const EstimatorRequest& request) {
  data.validate();
  config.grid.validate();
  const int n = data.n_units;
  const int t_max = data.n_times;
  const int n_delta = config.grid.size();
  const int k_folds = config.n_folds;
  require(k_folds >= 1 && k_folds <= n, ErrorCode::invalid_k,
          "fold count must lie in 1..n");
  if (config.known_propensity != nullptr) {
    require(config.known_propensity->rows() == n &&
                config.known_propensity->cols() == t_max,
            ErrorCode::dimension_mismatch,
            "known propensity matrix must be n x T");
    require(config.known_propensity->minCoeff() >= 0.0 &&
                config.known_propensity->maxCoeff() <= 1.0,
            ErrorCode::pi_out_of_range,
            "known propensities must lie in [0,1]");
  }

  const bool need_recursion = (request.efficient || request.plugin) &&
                              !config.zero_pseudo_regressions;
  const EngineWorkspace ws = build_workspace(data, config.max_lag);
  const FoldAssignment folds =
      assign_folds(n, k_folds, derive_seed(config.seed, {kFoldTag}));

  std::vector<std::vector<int>> test_rows(static_cast<size_t>(k_folds));
  std::vector<std::vector<int>> train_rows(static_cast<size_t>(k_folds));
  for (int i = 0; i < n; ++i) {
    const int label = folds.labels[static_cast<size_t>(i)];
    test_rows[static_cast<size_t>(label - 1)].push_back(i);
    for (int k = 0; k < k_folds; ++k)
      if (k_folds == 1 || label != k + 1)
        train_rows[static_cast<size_t>(k)].push_back(i);
  }
  for (int k = 0; k < k_folds; ++k) {
    require(!test_rows[static_cast<size_t>(k)].empty(),
            ErrorCode::no_test_units,
            "fold " + std::to_string(k + 1) + " has no evaluation units");
    require(!train_rows[static_cast<size_t>(k)].empty(),
            ErrorCode::empty_training_set,
            "fold " + std::to_string(k + 1) + " has no training units");
  }

  // Learner fits inside the delta loop run single threaded when the grid
  // itself is parallelized; a single-delta run hands them the budget.
  const int fit_threads = n_delta > 1 ? 1 : config.threads;

  EstimatorBatch out;
  if (request.efficient) out.influence.setZero(n, n_delta);
  Eigen::MatrixXd fold_eff(k_folds, n_delta), fold_ipw(k_folds, n_delta),
      fold_plugin(k_folds, n_delta);
  if (config.keep_nuisance) {
    out.nuisance.propensity.resize(static_cast<size_t>(k_folds));
    out.nuisance.m1.assign(
        static_cast<size_t>(k_folds),
        std::vector<Eigen::MatrixXd>(static_cast<size_t>(n_delta)));
    out.nuisance.m0 = out.nuisance.m1;
  }

  for (int k = 0; k < k_folds; ++k) {
    const auto& train = train_rows[static_cast<size_t>(k)];
    const auto& test = test_rows[static_cast<size_t>(k)];

    // Step 1: treatment regressions on the training folds, predictions
    // everywhere.
    Eigen::MatrixXd pi_hat(n, t_max);
    if (config.known_propensity != nullptr) {
      pi_hat = *config.known_propensity;
    } else {
      for (int t = 0; t < t_max; ++t) {
        LearnerSpec spec = config.propensity_learner;
        spec.seed = derive_seed(config.seed,
                                {kPropTag, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(t)});
        Eigen::MatrixXd x_train = ws.history[static_cast<size_t>(t)](
            train, Eigen::all);
        Eigen::VectorXd a_train(static_cast<Eigen::Index>(train.size()));
        for (size_t idx = 0; idx < train.size(); ++idx)
          a_train(static_cast<Eigen::Index>(idx)) =
              data.treatment(train[idx], t);
        ModelPtr model =
            fit(spec, x_train, a_train, Task::probability, fit_threads);
        pi_hat.col(t) = model->predict(ws.history[static_cast<size_t>(t)]);
      }
    }
    if (config.keep_nuisance)
      out.nuisance.propensity[static_cast<size_t>(k)] = pi_hat;

    parallel_for(n_delta, config.threads, [&](std::int64_t j) {
      const double delta = config.grid.values[static_cast<size_t>(j)];
      const double ratio = std::max(delta, 1.0 / delta);

      // Steps 2-3 and 5: W_t, cumulative products, V_t.
      Eigen::MatrixXd wtil(n, t_max), v_mat(n, t_max);
      for (int t = 0; t < t_max; ++t) {
        const double bound = std::pow(ratio, t + 1) * (1.0 + 1e-9);
        for (int i = 0; i < n; ++i) {
          const int a = data.treatment(i, t);
          const double pi = pi_hat(i, t);
          const double w = ipw_weight(a, pi, delta);
          const double cumulative = t == 0 ? w : wtil(i, t - 1) * w;
          require(cumulative >= 1.0 / bound && cumulative <= bound,
                  ErrorCode::non_finite_input,
                  "cumulative weight escaped its [r^-t, r^t] envelope");
          wtil(i, t) = cumulative;
          v_mat(i, t) = v_weight(a, pi, delta);
        }
      }

      // Step 4: backward recursion; R starts at Y and every time step
      // collapses the fitted regression over the treatment arms.
      Eigen::VectorXd r = data.outcome;
      Eigen::VectorXd augmentation = Eigen::VectorXd::Zero(n);
      for (int t = t_max - 1; t >= 0; --t) {
        Eigen::VectorXd m1(n), m0(n);
        if (config.zero_pseudo_regressions) {
          m1.setZero();
          m0.setZero();
        } else if (config.outcome_regression_override) {
          for (int i = 0; i < n; ++i) {
            m1(i) = config.outcome_regression_override(t + 1, i, 1);
            m0(i) = config.outcome_regression_override(t + 1, i, 0);
          }
        } else if (need_recursion) {
          LearnerSpec spec = config.outcome_learner;
          spec.seed = derive_seed(
              config.seed,
              {kOutcomeTag, static_cast<std::uint64_t>(k),
               static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(t)});
          Eigen::MatrixXd x_train =
              ws.outcome_features[static_cast<size_t>(t)](train, Eigen::all);
          Eigen::VectorXd r_train = r(train);
          ModelPtr model =
              fit(spec, x_train, r_train, Task::regression, fit_threads);
          m1 = model->predict(ws.features_a1[static_cast<size_t>(t)]);
          m0 = model->predict(ws.features_a0[static_cast<size_t>(t)]);
        } else {
          break;  // ipw only: the recursion is never used
        }
        if (config.keep_nuisance) {
          auto& slot1 = out.nuisance.m1[static_cast<size_t>(k)]
                                       [static_cast<size_t>(j)];
          auto& slot0 = out.nuisance.m0[static_cast<size_t>(k)]
                                       [static_cast<size_t>(j)];
          if (slot1.size() == 0) {
            slot1.setZero(n, t_max);
            slot0.setZero(n, t_max);
          }
          slot1.col(t) = m1;
          slot0.col(t) = m0;
        }
        for (int i = 0; i < n; ++i)
          r(i) = pseudo_outcome(pi_hat(i, t), m1(i), m0(i), delta);
        augmentation += wtil.col(t).cwiseProduct(v_mat.col(t)).cwiseProduct(r);
      }

      // Step 6 plus the fold reductions (unit-index order, so results do
      // not depend on the parallel schedule).
      Eigen::VectorXd phi_ipw = wtil.col(t_max - 1).cwiseProduct(data.outcome);
      if (request.efficient) {
        Eigen::VectorXd phi = phi_ipw + augmentation;
        require(phi.allFinite(), ErrorCode::non_finite_input,
                "non-finite influence value");
        for (int i : test) out.influence(i, j) = phi(i);
        fold_eff(k, j) = mean_over(phi, test);
      }
      if (request.ipw) fold_ipw(k, j) = mean_over(phi_ipw, test);
      if (request.plugin) fold_plugin(k, j) = mean_over(r, test);
    });
  }

  auto fold_average = [&](const Eigen::MatrixXd& per_fold) {
    Eigen::VectorXd psi(n_delta);
    for (int j = 0; j < n_delta; ++j) {
      double acc = 0.0;
      for (int k = 0; k < k_folds; ++k) acc += per_fold(k, j);
      psi(j) = acc / static_cast<double>(k_folds);
    }
    return psi;
  };
  if (request.efficient) out.psi_efficient = fold_average(fold_eff);
  if (request.ipw) out.psi_ipw = fold_average(fold_ipw);
  if (request.plugin) out.psi_plugin = fold_average(fold_plugin);
  return out;
}

EfficientEstimate efficient_estimate(const LongitudinalDataset& data,
                                     const EstimatorConfig& config) {
  EstimatorRequest request;
  request.efficient = true;
  EstimatorBatch batch = run_estimators(data, config, request);
  EfficientEstimate out;
  out.psi = std::move(batch.psi_efficient);
  out.influence = std::move(batch.influence);
  out.nuisance = std::move(batch.nuisance);
  return out;
}

Eigen::VectorXd ipw_estimate(const LongitudinalDataset& data,
                             const EstimatorConfig& config) {
  EstimatorRequest request;
  request.efficient = false;
  request.ipw = true;
  return run_estimators(data, config, request).psi_ipw;
}

Eigen::VectorXd plugin_estimate(const LongitudinalDataset& data,
                                const EstimatorConfig& config) {
  EstimatorRequest request;
  request.efficient = false;
  request.plugin = true;
  return run_estimators(data, config, request).psi_plugin;
}

void write_influence_csv(const LongitudinalDataset& data,
                         const DeltaGrid& grid,
                         const InfluenceMatrix& influence,
                         const std::string& path) {
  require(influence.rows() == data.n_units &&
              influence.cols() == grid.size(),
          ErrorCode::dimension_mismatch,
          "influence matrix shape does not match dataset/grid");
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << "unit_id,delta,phi\n";
  for (int i = 0; i < data.n_units; ++i)
    for (int j = 0; j < grid.size(); ++j)
      out << data.unit_ids[static_cast<size_t>(i)] << ','
          << format_double(grid.values[static_cast<size_t>(j)]) << ','
          << format_double(influence(i, j)) << '\n';
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

}  // namespace ipsi

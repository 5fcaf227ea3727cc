// Command-line front end: `estimate` runs the influence-function pipeline
// on a CSV, `simulate` runs the coverage/metrics experiments, `oracle`
// evaluates ground-truth curves for the built-in data-generating
// processes. Runs are seeded and reproduce byte-identically.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipsi/dataset.hpp"
#include "ipsi/estimators.hpp"
#include "ipsi/inference.hpp"
#include "ipsi/intervention.hpp"
#include "ipsi/parallel.hpp"
#include "ipsi/simulation.hpp"
#include "ipsi/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ipsi::ErrorCode code) {
  using ipsi::ErrorCode;
  switch (code) {
    case ErrorCode::missing_column:
    case ErrorCode::non_binary_treatment:
    case ErrorCode::ragged_panel:
    case ErrorCode::non_numeric_value:
    case ErrorCode::io_failure:
    case ErrorCode::time_out_of_range:
    case ErrorCode::empty_training_set:
    case ErrorCode::no_test_units:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::too_few_units:
      return 3;
    case ErrorCode::non_finite_input:
    case ErrorCode::zero_variance:
      return 4;
    default:
      return 2;
  }
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t hash = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

struct CommonOptions {
  std::string outdir;
  double delta_min = std::exp(-2.3);
  double delta_max = std::exp(2.3);
  int delta_points = 100;
  double alpha = 0.05;
  long long bootstrap_reps = 10000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all hardware threads
};

void add_grid_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--delta-min", opt.delta_min, "Smallest delta")
      ->capture_default_str();
  cmd->add_option("--delta-max", opt.delta_max, "Largest delta")
      ->capture_default_str();
  cmd->add_option("--delta-points", opt.delta_points,
                  "Number of log-spaced grid values")
      ->capture_default_str();
}

void add_common_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--outdir", opt.outdir, "Output directory")->required();
  cmd->add_option("--alpha", opt.alpha, "Band level")->capture_default_str();
  cmd->add_option("--bootstrap-reps", opt.bootstrap_reps,
                  "Multiplier bootstrap replications")
      ->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Master seed")->capture_default_str();
  cmd->add_option("--threads", opt.threads, "Worker threads (0 = all)")
      ->capture_default_str();
  cmd->set_config("--config", "", "Read options from a config file");
}

// Every run leaves enough metadata behind to replay it exactly.
void write_run_info(const fs::path& outdir, const CLI::App& cmd,
                    const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>&
                        extra) {
  std::ofstream info(outdir / "run_info.txt");
  info << "tool=ipsi\n";
  info << "version=" << ipsi::kVersion << "\n";
  info << "subcommand=" << subcommand << "\n";
  for (const auto& [key, value] : extra) info << key << "=" << value << "\n";
  std::ofstream config(outdir / "config.txt");
  config << cmd.config_to_str(true, true);
}

struct EstimateArgs {
  CommonOptions common;
  std::string input;
  int nsplits = 1;
  std::string learner_prop = "logistic";
  std::string learner_out = "linear:interactions=1";
  std::string multiplier = "rademacher";
  int max_lag = 0;
  bool dump_influence = false;
  std::string id_col = "id", time_col = "time", a_col = "a", y_col = "y";
  std::vector<std::string> covariate_cols;
};

int run_estimate(const CLI::App& cmd, const EstimateArgs& args) {
  ipsi::CsvSchema schema;
  schema.id_column = args.id_col;
  schema.time_column = args.time_col;
  schema.treatment_column = args.a_col;
  schema.outcome_column = args.y_col;
  schema.covariate_columns = args.covariate_cols;
  ipsi::LongitudinalDataset data = ipsi::load_csv(args.input, schema);

  ipsi::EstimatorConfig config;
  config.n_folds = args.nsplits;
  config.propensity_learner = ipsi::parse_learner_spec(args.learner_prop);
  config.outcome_learner = ipsi::parse_learner_spec(args.learner_out);
  config.grid = ipsi::log_delta_grid(args.common.delta_min,
                                     args.common.delta_max,
                                     args.common.delta_points);
  config.seed = args.common.seed;
  config.threads = ipsi::resolve_threads(args.common.threads);
  config.max_lag = args.max_lag;

  ipsi::EfficientEstimate estimate = ipsi::efficient_estimate(data, config);

  ipsi::MultiplierKind kind = args.multiplier == "gaussian"
                                  ? ipsi::MultiplierKind::gaussian
                                  : ipsi::MultiplierKind::rademacher;
  ipsi::require(args.multiplier == "gaussian" ||
                    args.multiplier == "rademacher",
                ipsi::ErrorCode::invalid_config,
                "--multiplier must be rademacher or gaussian");
  ipsi::EffectCurve curve = ipsi::make_effect_curve(
      estimate.influence, estimate.psi, config.grid, args.common.alpha,
      args.common.bootstrap_reps,
      ipsi::derive_seed(args.common.seed, {0x62616e64ULL}), kind,
      config.threads);

  const fs::path outdir(args.common.outdir);
  fs::create_directories(outdir);
  ipsi::write_curve_csv(curve, (outdir / "curve.csv").string());
  ipsi::write_curve_summary(curve, (outdir / "summary.csv").string());
  if (args.dump_influence)
    ipsi::write_influence_csv(data, config.grid, estimate.influence,
                              (outdir / "influence.csv").string());
  write_run_info(outdir, cmd, "estimate",
                 {{"seed", std::to_string(args.common.seed)},
                  {"input", args.input},
                  {"input_fnv1a64", hex64(fnv1a64_file(args.input))},
                  {"n_units", std::to_string(data.n_units)},
                  {"n_times", std::to_string(data.n_times)}});
  std::cout << "estimate: n=" << data.n_units << " T=" << data.n_times
            << " grid=" << config.grid.size() << " c_alpha=" << curve.c_alpha
            << " p_no_effect=" << curve.p_value << "\n";
  return 0;
}

struct SimulateArgs {
  CommonOptions common;
  std::string mode = "cor-p";
  std::string dgp = "kang-schafer";
  int n = 1000;
  int reps = 500;
  int rep_begin = 0;
  int nsplits = 0;
  std::vector<std::string> estimators{"efficient"};
  bool no_band = false;
  bool records = false;
  long long oracle_draws = 1'000'000;
  int forest_trees = 100;
};

int run_simulate(const CLI::App& cmd, SimulateArgs& args) {
  ipsi::SimConfig config;
  config.n = args.n;
  config.reps = args.reps;
  config.rep_begin = args.rep_begin;
  config.grid = ipsi::log_delta_grid(args.common.delta_min,
                                     args.common.delta_max,
                                     args.common.delta_points);
  config.mode = ipsi::parse_nuisance_mode(args.mode);
  config.dgp = args.dgp;
  config.run_efficient = false;
  config.run_ipw = false;
  config.run_plugin = false;
  for (const std::string& name : args.estimators) {
    if (name == "efficient") config.run_efficient = true;
    else if (name == "ipw") config.run_ipw = true;
    else if (name == "plugin") config.run_plugin = true;
    else
      ipsi::fail(ipsi::ErrorCode::invalid_config,
                 "unknown estimator '" + name + "'");
  }
  config.n_folds = args.nsplits;
  config.alpha = args.common.alpha;
  config.bootstrap_reps = args.common.bootstrap_reps;
  config.with_band = !args.no_band;
  config.seed = args.common.seed;
  config.oracle_draws = args.oracle_draws;
  config.forest_trees = args.forest_trees;
  config.threads = ipsi::resolve_threads(args.common.threads);

  ipsi::SimReport report = ipsi::coverage_experiment(config);

  const fs::path outdir(args.common.outdir);
  fs::create_directories(outdir);
  ipsi::write_sim_report_csv(config, report, (outdir / "report.csv").string());
  if (args.records)
    ipsi::write_sim_records_csv(config, report,
                                (outdir / "records.csv").string());
  {
    std::ofstream summary(outdir / "summary.txt");
    summary << "mode " << ipsi::nuisance_mode_name(config.mode) << ", dgp "
            << config.dgp << ", n " << config.n << ", reps " << config.reps
            << "\n";
    if (config.with_band) {
      summary << "uniform band coverage "
              << ipsi::format_double(report.coverage) << " (se "
              << ipsi::format_double(report.coverage_se) << ")\n";
      summary << "no-effect rejection rate at alpha "
              << ipsi::format_double(config.alpha) << ": "
              << ipsi::format_double(report.rejection_rate) << "\n";
      summary << "median band half-width "
              << ipsi::format_double(report.median_half_width)
              << ", oracle mc se "
              << ipsi::format_double(report.truth_mc_se_max)
              << (report.oracle_precision_ok ? " (ok)" : " (too coarse)")
              << "\n";
    }
    for (const auto& [name, metrics] : report.metrics)
      summary << name << ": integrated bias "
              << ipsi::format_double(metrics.integrated_bias) << ", rmse "
              << ipsi::format_double(metrics.integrated_rmse) << "\n";
  }
  write_run_info(outdir, cmd, "simulate",
                 {{"seed", std::to_string(config.seed)},
                  {"mode", ipsi::nuisance_mode_name(config.mode)},
                  {"dgp", config.dgp}});
  std::cout << "simulate: coverage=" << report.coverage
            << " rejection=" << report.rejection_rate << "\n";
  return 0;
}

struct OracleArgs {
  CommonOptions common;
  std::string dgp = "kang-schafer";
  long long draws = 1'000'000;
};

int run_oracle(const CLI::App& cmd, const OracleArgs& args) {
  auto dgp = ipsi::make_dgp(args.dgp);
  ipsi::DeltaGrid grid = ipsi::log_delta_grid(
      args.common.delta_min, args.common.delta_max, args.common.delta_points);
  const fs::path outdir(args.common.outdir);
  fs::create_directories(outdir);
  std::ofstream out(outdir / "truth.csv");
  ipsi::require(out.good(), ipsi::ErrorCode::io_failure,
                "cannot write truth.csv");
  out << "delta,psi_true,mc_se\n";
  const int threads = ipsi::resolve_threads(args.common.threads);
  for (int j = 0; j < grid.size(); ++j) {
    const double delta = grid.values[static_cast<size_t>(j)];
    ipsi::OracleEstimate est = ipsi::oracle_psi(
        *dgp, delta, args.draws,
        ipsi::derive_seed(args.common.seed,
                          {0x747275ULL, static_cast<std::uint64_t>(j)}),
        threads);
    out << ipsi::format_double(delta) << ',' << ipsi::format_double(est.value)
        << ',' << ipsi::format_double(est.mc_se) << '\n';
  }
  write_run_info(outdir, cmd, "oracle",
                 {{"seed", std::to_string(args.common.seed)},
                  {"dgp", args.dgp},
                  {"draws", std::to_string(args.draws)}});
  std::cout << "oracle: wrote " << grid.size() << " grid values\n";
  return 0;
}

void report_error(const std::string& outdir, const std::string& name,
                  const std::string& message, int exit_code) {
  json record;
  record["error"] = name;
  record["message"] = message;
  record["exit_code"] = exit_code;
  std::cerr << record.dump() << std::endl;
  if (!outdir.empty()) {
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (!ec) {
      std::ofstream out(fs::path(outdir) / "error.json");
      out << record.dump(2) << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental propensity-score intervention effects"};
  app.set_version_flag("--version", ipsi::kVersion);
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_estimate = app.add_subcommand(
      "estimate", "Estimate an effect curve from a longitudinal CSV");
  cmd_estimate->add_option("--input", est.input, "Long-format CSV")
      ->required();
  add_common_options(cmd_estimate, est.common);
  add_grid_options(cmd_estimate, est.common);
  cmd_estimate->add_option("--nsplits", est.nsplits,
                           "Cross-fitting folds (1 = full sample)")
      ->capture_default_str();
  cmd_estimate->add_option("--learner-prop", est.learner_prop,
                           "Propensity learner spec")
      ->capture_default_str();
  cmd_estimate->add_option("--learner-out", est.learner_out,
                           "Pseudo-regression learner spec")
      ->capture_default_str();
  cmd_estimate->add_option("--multiplier", est.multiplier,
                           "Bootstrap multipliers: rademacher|gaussian")
      ->capture_default_str();
  cmd_estimate->add_option("--max-lag", est.max_lag,
                           "History truncation (0 = full history)")
      ->capture_default_str();
  cmd_estimate->add_flag("--dump-influence", est.dump_influence,
                         "Write per-unit influence values");
  cmd_estimate->add_option("--id-col", est.id_col, "Unit id column")
      ->capture_default_str();
  cmd_estimate->add_option("--time-col", est.time_col, "Time column")
      ->capture_default_str();
  cmd_estimate->add_option("--a-col", est.a_col, "Treatment column")
      ->capture_default_str();
  cmd_estimate->add_option("--y-col", est.y_col, "Outcome column")
      ->capture_default_str();
  cmd_estimate->add_option("--covariates", est.covariate_cols,
                           "Explicit covariate columns (default: the rest)");

  SimulateArgs sim;
  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "Run the simulation experiments");
  add_common_options(cmd_simulate, sim.common);
  sim.common.delta_points = 25;  // coverage default; metrics runs pass 100
  add_grid_options(cmd_simulate, sim.common);
  cmd_simulate->add_option("--mode", sim.mode,
                           "cor-p|mis-p|np-x|np-xstar")
      ->capture_default_str();
  cmd_simulate->add_option("--dgp", sim.dgp, "kang-schafer|flat")
      ->capture_default_str();
  cmd_simulate->add_option("--n", sim.n, "Sample size per replication")
      ->capture_default_str();
  cmd_simulate->add_option("--reps", sim.reps, "Replications")
      ->capture_default_str();
  cmd_simulate->add_option("--rep-begin", sim.rep_begin,
                           "First replication index (resumable runs)")
      ->capture_default_str();
  cmd_simulate->add_option("--nsplits", sim.nsplits,
                           "Folds (0 = mode default)")
      ->capture_default_str();
  cmd_simulate->add_option("--estimators", sim.estimators,
                           "Subset of efficient,ipw,plugin")
      ->delimiter(',')
      ->capture_default_str();
  cmd_simulate->add_flag("--no-band", sim.no_band,
                         "Skip the bootstrap band (metrics only)");
  cmd_simulate->add_flag("--records", sim.records,
                         "Archive per-replication curves");
  cmd_simulate->add_option("--oracle-draws", sim.oracle_draws,
                           "Monte Carlo draws for the truth curve")
      ->capture_default_str();
  cmd_simulate->add_option("--forest-trees", sim.forest_trees,
                           "Forest size inside the cv ensemble")
      ->capture_default_str();

  OracleArgs ora;
  CLI::App* cmd_oracle =
      app.add_subcommand("oracle", "Evaluate a ground-truth effect curve");
  add_common_options(cmd_oracle, ora.common);
  add_grid_options(cmd_oracle, ora.common);
  cmd_oracle->add_option("--dgp", ora.dgp, "kang-schafer|flat")
      ->capture_default_str();
  cmd_oracle->add_option("--oracle-draws", ora.draws,
                         "Monte Carlo draws per grid value")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string outdir;
  try {
    if (cmd_estimate->parsed()) {
      outdir = est.common.outdir;
      return run_estimate(*cmd_estimate, est);
    }
    if (cmd_simulate->parsed()) {
      outdir = sim.common.outdir;
      return run_simulate(*cmd_simulate, sim);
    }
    outdir = ora.common.outdir;
    return run_oracle(*cmd_oracle, ora);
  } catch (const ipsi::Error& e) {
    const int code = exit_code_for(e.code());
    report_error(outdir, ipsi::error_code_name(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(outdir, "Internal", e.what(), 4);
    return 4;
  }
}

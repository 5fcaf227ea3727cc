#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ipsi/errors.hpp"

namespace ipsi {

// Long-format longitudinal data: n units observed at times 1..T, binary
// treatment at every time, outcome attached at the final time. Immutable
// after construction; concurrent reads are safe.
struct LongitudinalDataset {
  int n_units = 0;
  int n_times = 0;
  std::vector<std::string> unit_ids;         // stable order: sorted by id
  std::vector<std::string> covariate_names;  // base covariates, size p
  std::vector<Eigen::MatrixXd> covariates;   // T matrices, n x p_t
  Eigen::MatrixXi treatment;                 // n x T, entries in {0,1}
  Eigen::VectorXd outcome;                   // n, terminal Y
  Eigen::MatrixXd outcome_by_time;           // n x T as loaded/generated
  // True when outcomes were time-varying and the lagged outcome was
  // appended to the covariates of times 2..T at ingestion.
  bool lagged_outcome_appended = false;

  int covariate_dim(int t) const;  // t is 1-based
  void validate() const;
};

struct CsvSchema {
  std::string id_column = "id";
  std::string time_column = "time";
  std::string treatment_column = "a";
  std::string outcome_column = "y";
  // Empty means: every column other than id/time/a/y is a covariate.
  std::vector<std::string> covariate_columns;
  enum class LaggedOutcome { automatic, always, never };
  LaggedOutcome lagged_outcome = LaggedOutcome::automatic;
};

LongitudinalDataset load_csv(const std::string& path,
                             const CsvSchema& schema = {});

// Inverse of load_csv up to row order: emits the original per-time
// outcome column and the base covariates (without any appended lag).
// Numeric values are written in shortest round-trip form so
// load(write(load(f))) reproduces load(f) bit-exactly.
void write_csv(const LongitudinalDataset& data, const std::string& path,
               const CsvSchema& schema = {});

// Row i is unit i's history just before treatment at time t:
// (x_1, a_1, x_2, a_2, ..., x_{t-1}, a_{t-1}, x_t).
struct HistoryMatrix {
  int time = 0;
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;
};

// max_lag <= 0 keeps the full history; otherwise only the most recent
// max_lag timepoints (including t) contribute columns.
HistoryMatrix build_history(const LongitudinalDataset& data, int t,
                            int max_lag = 0);

struct FoldAssignment {
  int n_folds = 1;
  std::vector<int> labels;  // per unit, values in 1..K
};

// Pure function of (n, k, seed); sizes differ by at most one. k == 1
// assigns every unit to fold 1 (full-sample Z-estimator mode).
FoldAssignment assign_folds(int n, int k, std::uint64_t seed);

// Shortest-round-trip decimal formatting used for every numeric value
// this library writes.
std::string format_double(double v);

}  // namespace ipsi

#include "ipsi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ipsi/rng.hpp"

namespace ipsi {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_column: return "MissingColumn";
    case ErrorCode::non_binary_treatment: return "NonBinaryTreatment";
    case ErrorCode::ragged_panel: return "RaggedPanel";
    case ErrorCode::non_numeric_value: return "NonNumericValue";
    case ErrorCode::time_out_of_range: return "TimeOutOfRange";
    case ErrorCode::invalid_k: return "InvalidK";
    case ErrorCode::empty_training_set: return "EmptyTrainingSet";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::non_finite_input: return "NonFiniteInput";
    case ErrorCode::empty_candidates: return "EmptyCandidates";
    case ErrorCode::invalid_bounds: return "InvalidBounds";
    case ErrorCode::delta_non_positive: return "DeltaNonPositive";
    case ErrorCode::pi_out_of_range: return "PiOutOfRange";
    case ErrorCode::delta_out_of_bounds: return "DeltaOutOfBounds";
    case ErrorCode::no_test_units: return "NoTestUnits";
    case ErrorCode::too_few_units: return "TooFewUnits";
    case ErrorCode::zero_variance: return "ZeroVariance";
    case ErrorCode::invalid_b: return "InvalidB";
    case ErrorCode::unknown_dgp: return "UnknownDgp";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::io_failure: return "IoFailure";
  }
  return "Unknown";
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int LongitudinalDataset::covariate_dim(int t) const {
  require(t >= 1 && t <= n_times, ErrorCode::time_out_of_range,
          "time index " + std::to_string(t) + " outside 1.." +
              std::to_string(n_times));
  return static_cast<int>(covariates[static_cast<size_t>(t - 1)].cols());
}

void LongitudinalDataset::validate() const {
  require(n_units >= 1 && n_times >= 1, ErrorCode::ragged_panel,
          "dataset must have at least one unit and one time");
  require(static_cast<int>(unit_ids.size()) == n_units,
          ErrorCode::dimension_mismatch, "unit id count mismatch");
  require(static_cast<int>(covariates.size()) == n_times,
          ErrorCode::dimension_mismatch, "covariate block count mismatch");
  for (const auto& block : covariates) {
    require(block.rows() == n_units, ErrorCode::dimension_mismatch,
            "covariate block row count mismatch");
    require(block.allFinite(), ErrorCode::non_finite_input,
            "non-finite covariate value");
  }
  require(treatment.rows() == n_units && treatment.cols() == n_times,
          ErrorCode::dimension_mismatch, "treatment matrix shape mismatch");
  for (int i = 0; i < n_units; ++i)
    for (int t = 0; t < n_times; ++t)
      require(treatment(i, t) == 0 || treatment(i, t) == 1,
              ErrorCode::non_binary_treatment,
              "treatment must be 0 or 1");
  require(outcome.size() == n_units, ErrorCode::dimension_mismatch,
          "outcome length mismatch");
  require(outcome.allFinite(), ErrorCode::non_finite_input,
          "non-finite outcome value");
}

namespace {

// Minimal CSV reader: comma separated, double quotes guard embedded
// commas, trailing CR stripped.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (quoted) {
      if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

double parse_number(const std::string& s, const std::string& column,
                    size_t line_no) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end ||
      !std::isfinite(value)) {
    fail(ErrorCode::non_numeric_value,
         "column '" + column + "' line " + std::to_string(line_no) +
             ": cannot parse '" + s + "' as a finite number");
  }
  return value;
}

struct RawRow {
  std::string id;
  long long time = 0;
  double a = 0.0;
  double y = 0.0;
  std::vector<double> x;
};

bool all_numeric_ids(const std::vector<std::string>& ids) {
  for (const auto& s : ids) {
    double v;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return false;
  }
  return true;
}

}  // namespace

LongitudinalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_failure, "cannot open '" + path + "'");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io_failure,
          "empty file '" + path + "'");
  std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorCode::missing_column,
            "required column '" + name + "' not found in '" + path + "'");
    return static_cast<int>(it - header.begin());
  };
  const int id_col = column_index(schema.id_column);
  const int time_col = column_index(schema.time_column);
  const int a_col = column_index(schema.treatment_column);
  const int y_col = column_index(schema.outcome_column);

  std::vector<int> x_cols;
  std::vector<std::string> x_names;
  if (schema.covariate_columns.empty()) {
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == id_col || j == time_col || j == a_col || j == y_col) continue;
      x_cols.push_back(j);
      x_names.push_back(header[static_cast<size_t>(j)]);
    }
  } else {
    for (const auto& name : schema.covariate_columns) {
      x_cols.push_back(column_index(name));
      x_names.push_back(name);
    }
  }

  std::vector<RawRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    require(fields.size() == header.size(), ErrorCode::non_numeric_value,
            "line " + std::to_string(line_no) + ": expected " +
                std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size()));
    RawRow row;
    row.id = fields[static_cast<size_t>(id_col)];
    double t = parse_number(fields[static_cast<size_t>(time_col)],
                            schema.time_column, line_no);
    require(t == std::floor(t), ErrorCode::non_numeric_value,
            "line " + std::to_string(line_no) + ": time must be an integer");
    row.time = static_cast<long long>(t);
    row.a = parse_number(fields[static_cast<size_t>(a_col)],
                         schema.treatment_column, line_no);
    require(row.a == 0.0 || row.a == 1.0, ErrorCode::non_binary_treatment,
            "line " + std::to_string(line_no) + ": treatment value " +
                fields[static_cast<size_t>(a_col)] + " is not 0 or 1");
    row.y = parse_number(fields[static_cast<size_t>(y_col)],
                         schema.outcome_column, line_no);
    row.x.reserve(x_cols.size());
    for (size_t j = 0; j < x_cols.size(); ++j)
      row.x.push_back(parse_number(fields[static_cast<size_t>(x_cols[j])],
                                   x_names[j], line_no));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::ragged_panel, "no data rows in file");

  // Stable unit ordering: numeric when every id parses as a number,
  // lexicographic otherwise; times ascending within unit.
  std::map<std::string, std::vector<size_t>> by_id;
  for (size_t r = 0; r < rows.size(); ++r) by_id[rows[r].id].push_back(r);
  std::vector<std::string> ids;
  ids.reserve(by_id.size());
  for (const auto& kv : by_id) ids.push_back(kv.first);
  if (all_numeric_ids(ids)) {
    std::stable_sort(ids.begin(), ids.end(),
                     [](const std::string& a, const std::string& b) {
                       return std::stod(a) < std::stod(b);
                     });
  }

  const int n = static_cast<int>(ids.size());

  // All units must share one consecutive run of times.
  std::vector<long long> times0;
  {
    auto idx = by_id[ids[0]];
    for (size_t r : idx) times0.push_back(rows[r].time);
    std::sort(times0.begin(), times0.end());
    for (size_t j = 0; j < times0.size(); ++j) {
      require(j == 0 || times0[j] != times0[j - 1], ErrorCode::ragged_panel,
              "unit '" + ids[0] + "' has duplicate time " +
                  std::to_string(times0[j]));
      require(j == 0 || times0[j] == times0[j - 1] + 1,
              ErrorCode::ragged_panel,
              "unit '" + ids[0] + "' has non-consecutive times");
    }
  }
  const int n_times = static_cast<int>(times0.size());
  const long long t_base = times0[0];

  LongitudinalDataset data;
  data.n_units = n;
  data.n_times = n_times;
  data.unit_ids = ids;
  data.covariate_names = x_names;
  const int p = static_cast<int>(x_names.size());
  data.covariates.assign(static_cast<size_t>(n_times),
                         Eigen::MatrixXd(n, p));
  data.treatment.resize(n, n_times);
  data.outcome_by_time.resize(n, n_times);

  for (int i = 0; i < n; ++i) {
    const auto& idx = by_id[ids[static_cast<size_t>(i)]];
    require(static_cast<int>(idx.size()) == n_times, ErrorCode::ragged_panel,
            "unit '" + ids[static_cast<size_t>(i)] + "' has " +
                std::to_string(idx.size()) + " records, expected " +
                std::to_string(n_times));
    std::vector<size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) {
      return rows[a].time < rows[b].time;
    });
    for (int t = 0; t < n_times; ++t) {
      const RawRow& row = rows[sorted[static_cast<size_t>(t)]];
      require(row.time == t_base + t, ErrorCode::ragged_panel,
              "unit '" + row.id + "' lacks time " +
                  std::to_string(t_base + t));
      for (int j = 0; j < p; ++j)
        data.covariates[static_cast<size_t>(t)](i, j) =
            row.x[static_cast<size_t>(j)];
      data.treatment(i, t) = static_cast<int>(row.a);
      data.outcome_by_time(i, t) = row.y;
    }
  }
  data.outcome = data.outcome_by_time.col(n_times - 1);

  // Time-varying outcomes (y differs within a unit across times): treat
  // y_{t-1} as a covariate of time t and keep the final y as the outcome.
  bool varying = false;
  if (n_times > 1) {
    for (int i = 0; i < n && !varying; ++i)
      for (int t = 1; t < n_times && !varying; ++t)
        varying = data.outcome_by_time(i, t) != data.outcome_by_time(i, 0);
  }
  const bool apply_lag =
      schema.lagged_outcome == CsvSchema::LaggedOutcome::always ||
      (schema.lagged_outcome == CsvSchema::LaggedOutcome::automatic &&
       varying);
  if (apply_lag && n_times > 1) {
    data.lagged_outcome_appended = true;
    for (int t = 1; t < n_times; ++t) {
      Eigen::MatrixXd wide(n, p + 1);
      wide.leftCols(p) = data.covariates[static_cast<size_t>(t)];
      wide.col(p) = data.outcome_by_time.col(t - 1);
      data.covariates[static_cast<size_t>(t)] = std::move(wide);
    }
  }

  data.validate();
  return data;
}

void write_csv(const LongitudinalDataset& data, const std::string& path,
               const CsvSchema& schema) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_failure, "cannot write '" + path + "'");
  out << schema.id_column << ',' << schema.time_column << ','
      << schema.treatment_column << ',' << schema.outcome_column;
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  const int p = static_cast<int>(data.covariate_names.size());
  for (int i = 0; i < data.n_units; ++i) {
    for (int t = 0; t < data.n_times; ++t) {
      out << data.unit_ids[static_cast<size_t>(i)] << ',' << (t + 1) << ','
          << data.treatment(i, t) << ','
          << format_double(data.outcome_by_time(i, t));
      for (int j = 0; j < p; ++j)
        out << ','
            << format_double(data.covariates[static_cast<size_t>(t)](i, j));
      out << '\n';
    }
  }
  require(out.good(), ErrorCode::io_failure, "write failed for '" + path + "'");
}

HistoryMatrix build_history(const LongitudinalDataset& data, int t,
                            int max_lag) {
  require(t >= 1 && t <= data.n_times, ErrorCode::time_out_of_range,
          "history time " + std::to_string(t) + " outside 1.." +
              std::to_string(data.n_times));
  const int first = max_lag > 0 ? std::max(1, t - max_lag + 1) : 1;

  int width = 0;
  for (int s = first; s <= t; ++s)
    width += data.covariate_dim(s) + (s < t ? 1 : 0);

  HistoryMatrix hist;
  hist.time = t;
  hist.values.resize(data.n_units, width);
  hist.column_names.reserve(static_cast<size_t>(width));

  int col = 0;
  for (int s = first; s <= t; ++s) {
    const auto& block = data.covariates[static_cast<size_t>(s - 1)];
    const int ps = static_cast<int>(block.cols());
    hist.values.middleCols(col, ps) = block;
    for (int j = 0; j < ps; ++j) {
      std::string base = j < static_cast<int>(data.covariate_names.size())
                             ? data.covariate_names[static_cast<size_t>(j)]
                             : "ylag";
      hist.column_names.push_back(base + "_t" + std::to_string(s));
    }
    col += ps;
    if (s < t) {
      hist.values.col(col) = data.treatment.col(s - 1).cast<double>();
      hist.column_names.push_back("a_t" + std::to_string(s));
      ++col;
    }
  }
  return hist;
}

FoldAssignment assign_folds(int n, int k, std::uint64_t seed) {
  require(k >= 1 && k <= n, ErrorCode::invalid_k,
          "fold count " + std::to_string(k) + " outside 1.." +
              std::to_string(n));
  FoldAssignment folds;
  folds.n_folds = k;
  folds.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) folds.labels[static_cast<size_t>(i)] = i % k + 1;
  if (k > 1) {
    Rng rng(derive_seed(seed, {0x666f6c64ULL, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(k)}));
    rng.shuffle(folds.labels);
  }
  return folds;
}

}  // namespace ipsi

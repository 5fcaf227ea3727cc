#include <doctest.h>

#include <functional>
#include <set>

#include "ipsi/dataset.hpp"
#include "test_support.hpp"

using namespace ipsi;
namespace ts = test_support;

namespace {

const char* kTinyPanel =
    "id,time,a,y,w1,w2\n"
    "1,1,0,3.5,0.25,-1\n"
    "1,2,1,3.5,0.5,2\n"
    "2,1,1,-0.75,1.5,0\n"
    "2,2,0,-0.75,2.5,1\n";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ipsi::Error");
  return ErrorCode::io_failure;
}

}  // namespace

TEST_CASE("load_csv parses a complete two-unit panel") {
  auto dir = ts::temp_dir("dataset");
  auto path = ts::write_file(dir / "tiny.csv", kTinyPanel);
  LongitudinalDataset data = load_csv(path);
  CHECK(data.n_units == 2);
  CHECK(data.n_times == 2);
  CHECK(data.covariate_names == std::vector<std::string>{"w1", "w2"});
  CHECK(data.treatment(0, 0) == 0);
  CHECK(data.treatment(0, 1) == 1);
  CHECK(data.outcome(0) == 3.5);
  CHECK(data.outcome(1) == -0.75);
  CHECK(data.covariates[1](1, 1) == 1.0);
  CHECK_FALSE(data.lagged_outcome_appended);
}

TEST_CASE("load_csv rejects a unit lacking a time") {
  auto dir = ts::temp_dir("dataset");
  auto path = ts::write_file(dir / "ragged.csv",
                             "id,time,a,y,x\n"
                             "1,1,0,1,0.1\n"
                             "1,2,1,1,0.2\n"
                             "2,1,1,2,0.3\n");
  CHECK(code_of([&] { load_csv(path); }) == ErrorCode::ragged_panel);
}

TEST_CASE("load_csv rejects non-binary treatment") {
  auto dir = ts::temp_dir("dataset");
  auto path = ts::write_file(dir / "badtrt.csv",
                             "id,time,a,y,x\n"
                             "1,1,2,1,0.1\n");
  CHECK(code_of([&] { load_csv(path); }) == ErrorCode::non_binary_treatment);
}

TEST_CASE("load_csv rejects missing columns and non-numeric values") {
  auto dir = ts::temp_dir("dataset");
  auto no_y = ts::write_file(dir / "noy.csv", "id,time,a,x\n1,1,0,0.5\n");
  CHECK(code_of([&] { load_csv(no_y); }) == ErrorCode::missing_column);
  auto bad = ts::write_file(dir / "nan.csv",
                            "id,time,a,y,x\n1,1,0,1,oops\n");
  CHECK(code_of([&] { load_csv(bad); }) == ErrorCode::non_numeric_value);
}

TEST_CASE("time-varying outcomes append the lagged outcome") {
  auto dir = ts::temp_dir("dataset");
  auto path = ts::write_file(dir / "tv.csv",
                             "id,time,a,y,x\n"
                             "1,1,0,1.5,0.1\n"
                             "1,2,1,2.5,0.2\n"
                             "2,1,1,-1,0.3\n"
                             "2,2,0,4,0.4\n");
  LongitudinalDataset data = load_csv(path);
  CHECK(data.lagged_outcome_appended);
  CHECK(data.covariate_dim(1) == 1);
  CHECK(data.covariate_dim(2) == 2);
  CHECK(data.covariates[1](0, 1) == 1.5);  // unit 1's y at time 1
  CHECK(data.covariates[1](1, 1) == -1.0);
  CHECK(data.outcome(0) == 2.5);  // final-time outcome
  CHECK(data.outcome(1) == 4.0);
}

TEST_CASE("csv round-trip preserves numeric values bit-exactly") {
  auto dir = ts::temp_dir("dataset");
  // Values chosen to stress shortest-round-trip formatting.
  auto path = ts::write_file(dir / "rt.csv",
                             "id,time,a,y,x\n"
                             "1,1,0,0.1,1e-300\n"
                             "1,2,1,0.1,3.141592653589793\n"
                             "2,1,1,-123456.789,0.30000000000000004\n"
                             "2,2,0,-123456.789,2\n");
  LongitudinalDataset first = load_csv(path);
  auto written = (dir / "rt_out.csv").string();
  write_csv(first, written);
  LongitudinalDataset second = load_csv(written);
  REQUIRE(second.n_units == first.n_units);
  REQUIRE(second.n_times == first.n_times);
  CHECK(second.outcome == first.outcome);
  CHECK(second.outcome_by_time == first.outcome_by_time);
  for (int t = 0; t < first.n_times; ++t)
    CHECK(second.covariates[static_cast<size_t>(t)] ==
          first.covariates[static_cast<size_t>(t)]);
  CHECK(second.treatment == first.treatment);
}

TEST_CASE("build_history interleaves blocks chronologically") {
  auto dir = ts::temp_dir("dataset");
  auto path = ts::write_file(dir / "hist.csv",
                             "id,time,a,y,x\n"
                             "7,1,1,0,1\n"
                             "7,2,0,0,3\n");
  LongitudinalDataset data = load_csv(path);

  HistoryMatrix h1 = build_history(data, 1);
  CHECK(h1.values.cols() == 1);  // t=1: baseline covariates only
  CHECK(h1.values(0, 0) == 1.0);

  HistoryMatrix h2 = build_history(data, 2);
  REQUIRE(h2.values.cols() == 3);  // (x_1, a_1, x_2)
  CHECK(h2.values(0, 0) == 1.0);
  CHECK(h2.values(0, 1) == 1.0);
  CHECK(h2.values(0, 2) == 3.0);

  CHECK_THROWS_AS(build_history(data, 3), Error);
}

TEST_CASE("build_history ignores variables later than t") {
  LongitudinalDataset data = ts::make_longitudinal(20, 3, 11);
  HistoryMatrix before = build_history(data, 2);
  // Editing time-3 values must not change H_2.
  data.covariates[2].array() += 100.0;
  for (int i = 0; i < data.n_units; ++i) data.treatment(i, 2) = 1;
  data.outcome.array() += 5.0;
  HistoryMatrix after = build_history(data, 2);
  CHECK(before.values == after.values);
}

TEST_CASE("build_history honors the max-lag truncation knob") {
  LongitudinalDataset data = ts::make_longitudinal(5, 4, 13);
  HistoryMatrix full = build_history(data, 4);
  CHECK(full.values.cols() == 4 + 3);  // 4 covariate blocks + 3 treatments
  HistoryMatrix lag2 = build_history(data, 4, 2);
  CHECK(lag2.values.cols() == 2 + 1);  // times 3..4 only
  CHECK(lag2.values.col(0) == data.covariates[2].col(0));
  CHECK(lag2.values.col(2) == full.values.col(6));
}

TEST_CASE("assign_folds is balanced and deterministic") {
  FoldAssignment a = assign_folds(10, 2, 7);
  FoldAssignment b = assign_folds(10, 2, 7);
  CHECK(a.labels == b.labels);

  FoldAssignment c = assign_folds(5, 2, 3);
  int ones = 0;
  for (int label : c.labels) ones += label == 1 ? 1 : 0;
  CHECK(std::abs(2 * ones - 5) == 1);  // sizes {3,2}

  FoldAssignment singleton = assign_folds(10, 10, 99);
  std::set<int> seen(singleton.labels.begin(), singleton.labels.end());
  CHECK(seen.size() == 10);

  FoldAssignment whole = assign_folds(4, 1, 5);
  for (int label : whole.labels) CHECK(label == 1);

  CHECK_THROWS_AS(assign_folds(3, 4, 1), Error);
  CHECK_THROWS_AS(assign_folds(3, 0, 1), Error);
}

TEST_CASE("assign_folds depends only on (n, K, seed)") {
  CHECK(assign_folds(40, 4, 1).labels != assign_folds(40, 4, 2).labels);
  CHECK(assign_folds(40, 4, 1).labels == assign_folds(40, 4, 1).labels);
}

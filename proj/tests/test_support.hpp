#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ipsi/dataset.hpp"
#include "ipsi/intervention.hpp"
#include "ipsi/rng.hpp"

namespace test_support {

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("ipsi_test_" + tag);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string write_file(const std::filesystem::path& path,
                              const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Synthetic longitudinal data with a scalar covariate per time, treatment
// probability depending on the current covariate and previous treatment,
// and a terminal outcome mixing the whole trajectory.
inline ipsi::LongitudinalDataset make_longitudinal(int n, int t_max,
                                                   std::uint64_t seed) {
  ipsi::LongitudinalDataset data;
  data.n_units = n;
  data.n_times = t_max;
  data.covariate_names = {"x"};
  data.covariates.assign(static_cast<size_t>(t_max), Eigen::MatrixXd(n, 1));
  data.treatment.resize(n, t_max);
  data.outcome.resize(n);
  data.outcome_by_time.resize(n, t_max);
  for (int i = 0; i < n; ++i) {
    data.unit_ids.push_back(std::to_string(i + 1));
    ipsi::Rng rng(ipsi::derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    double x_prev = 0.0;
    int a_prev = 0;
    double drift = 0.0;
    for (int t = 0; t < t_max; ++t) {
      double x = 0.6 * x_prev + rng.normal() + 0.3 * a_prev;
      double pi = expit(0.4 * x - 0.2 * a_prev + 0.1);
      int a = rng.bernoulli(pi) ? 1 : 0;
      data.covariates[static_cast<size_t>(t)](i, 0) = x;
      data.treatment(i, t) = a;
      drift += 0.8 * a + 0.5 * x;
      x_prev = x;
      a_prev = a;
    }
    double y = 2.0 + drift + rng.normal();
    data.outcome(i) = y;
    data.outcome_by_time.row(i).setConstant(y);
  }
  data.validate();
  return data;
}

}  // namespace test_support

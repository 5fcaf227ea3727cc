#include <doctest.h>

#include <cmath>

#include "ipsi/intervention.hpp"
#include "ipsi/simulation.hpp"
#include "test_support.hpp"

using namespace ipsi;

TEST_CASE("shift_propensity matches the worked odds-ratio values") {
  CHECK(shift_propensity(0.50, 1.5) == doctest::Approx(0.60).epsilon(1e-12));
  CHECK(shift_propensity(0.25, 1.5) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(shift_propensity(0.05, 1.5) ==
        doctest::Approx(0.075 / 1.025).epsilon(1e-12));

  for (double pi : {0.0, 0.123, 0.5, 0.987, 1.0})
    CHECK(shift_propensity(pi, 1.0) == pi);  // delta = 1 leaves pi unchanged
  for (double delta : {1e-6, 0.5, 3.0, 1e6}) {
    CHECK(shift_propensity(0.0, delta) == 0.0);
    CHECK(shift_propensity(1.0, delta) == 1.0);
  }

  CHECK_THROWS_AS(shift_propensity(0.5, 0.0), Error);
  CHECK_THROWS_AS(shift_propensity(0.5, -1.0), Error);
  CHECK_THROWS_AS(shift_propensity(1.5, 2.0), Error);
}

TEST_CASE("shift_propensity is monotone and composes multiplicatively") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    double pi = rng.uniform(0.01, 0.99);
    double d1 = std::exp(rng.uniform(-2.0, 2.0));
    double d2 = std::exp(rng.uniform(-2.0, 2.0));

    // Odds multiply: shift(shift(pi, d1), d2) == shift(pi, d1*d2).
    double chained = shift_propensity(shift_propensity(pi, d1), d2);
    double direct = shift_propensity(pi, d1 * d2);
    CHECK(chained == doctest::Approx(direct).epsilon(1e-12));

    // Strictly increasing in delta and in pi.
    CHECK(shift_propensity(pi, d1 * 1.01) > shift_propensity(pi, d1));
    CHECK(shift_propensity(std::min(0.995, pi + 0.005), d1) >
          shift_propensity(pi, d1));

    // The output odds ratio is exactly delta.
    double q = shift_propensity(pi, d1);
    double odds_ratio = (q / (1 - q)) / (pi / (1 - pi));
    CHECK(odds_ratio == doctest::Approx(d1).epsilon(1e-9));
  }
}

TEST_CASE("log_delta_grid spaces points geometrically") {
  DeltaGrid paper = log_delta_grid(std::exp(-2.3), std::exp(2.3), 100);
  CHECK(paper.size() == 100);
  CHECK(paper.values.front() == std::exp(-2.3));
  CHECK(paper.values.back() == std::exp(2.3));
  // Constant ratio between neighbors.
  double ratio = paper.values[1] / paper.values[0];
  for (size_t j = 1; j + 1 < paper.values.size(); ++j)
    CHECK(paper.values[j + 1] / paper.values[j] ==
          doctest::Approx(ratio).epsilon(1e-9));

  DeltaGrid single = log_delta_grid(2.0, 2.0, 1);
  CHECK(single.values == std::vector<double>{2.0});

  DeltaGrid three = log_delta_grid(1.0, 4.0, 3);
  REQUIRE(three.size() == 3);
  CHECK(three.values[0] == 1.0);
  CHECK(three.values[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(three.values[2] == 4.0);

  CHECK_THROWS_AS(log_delta_grid(0.0, 1.0, 5), Error);
  CHECK_THROWS_AS(log_delta_grid(2.0, 1.0, 5), Error);
  CHECK_THROWS_AS(log_delta_grid(1.0, 2.0, 1), Error);
}

TEST_CASE("delta grid validation rejects values outside its bounds") {
  DeltaGrid grid;
  grid.lower = 0.5;
  grid.upper = 2.0;
  grid.values = {0.5, 1.0, 2.5};
  CHECK_THROWS_AS(grid.validate(), Error);
  grid.values = {0.5, 1.0, 2.0};
  CHECK_NOTHROW(grid.validate());
}

TEST_CASE("kang-schafer oracle hits both extreme-delta limits") {
  auto dgp = make_dgp("kang-schafer");
  // E mu(X,1) = 200 + 10 (EX = 0), E mu(X,0) = 200.
  OracleEstimate hi = oracle_psi(*dgp, 1e8, 1'000'000, 17);
  CHECK(std::fabs(hi.value - 210.0) <= 4.0 * hi.mc_se);
  OracleEstimate lo = oracle_psi(*dgp, 1e-8, 1'000'000, 17);
  CHECK(std::fabs(lo.value - 200.0) <= 4.0 * lo.mc_se);
}

TEST_CASE("kang-schafer oracle at delta=1 matches an observational sample mean") {
  // Two independent Monte Carlo routes to E(Y): the oracle's g-formula
  // integrand at delta=1 and the raw mean of a simulated dataset.
  auto dgp = make_dgp("kang-schafer");
  OracleEstimate oracle = oracle_psi(*dgp, 1.0, 400'000, 5);

  LongitudinalDataset sample = simulate_kang_schafer(200'000, 99);
  double mean_y = sample.outcome.mean();
  double sd_y = std::sqrt((sample.outcome.array() - mean_y).square().sum() /
                          (sample.n_units - 1));
  double se_y = sd_y / std::sqrt(static_cast<double>(sample.n_units));

  double combined = std::sqrt(oracle.mc_se * oracle.mc_se + se_y * se_y);
  CHECK(std::fabs(oracle.value - mean_y) <= 4.0 * combined);
}

TEST_CASE("oracle values stay inside the outcome-mean envelope") {
  auto dgp = make_dgp("flat");
  // mu does not depend on treatment, so psi(delta) = E mu(X) = 200 for
  // every delta; the MC values must agree across deltas far beyond chance.
  OracleEstimate a = oracle_psi(*dgp, 0.2, 200'000, 1);
  OracleEstimate b = oracle_psi(*dgp, 5.0, 200'000, 1);
  CHECK(std::fabs(a.value - 200.0) <= 4.0 * a.mc_se);
  CHECK(std::fabs(b.value - 200.0) <= 4.0 * b.mc_se);
}

TEST_CASE("oracle_psi is a pure function of (dgp, delta, n_mc, seed)") {
  auto dgp = make_dgp("kang-schafer");
  OracleEstimate a = oracle_psi(*dgp, 2.5, 50'000, 123);
  OracleEstimate b = oracle_psi(*dgp, 2.5, 50'000, 123);
  CHECK(a.value == b.value);
  CHECK(a.mc_se == b.mc_se);
  OracleEstimate c = oracle_psi(*dgp, 2.5, 50'000, 124);
  CHECK(a.value != c.value);
}

TEST_CASE("make_dgp rejects unknown names") {
  CHECK_THROWS_AS(make_dgp("nope"), Error);
}

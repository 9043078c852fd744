#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rstring/rng.hpp"
#include "rstring/stats.hpp"

using namespace rstring;
using namespace rstring::stats;

TEST_CASE("moment helpers on a fixed sample") {
  std::vector<double> v{1, 2, 3, 4, 5};
  REQUIRE(mean(v) == Catch::Approx(3.0));
  REQUIRE(variance(v) == Catch::Approx(2.5));
  REQUIRE(std_error(v) == Catch::Approx(std::sqrt(0.5)));
  REQUIRE_THROWS_AS(mean(std::vector<double>{}), StatsError);
  REQUIRE_THROWS_AS(variance(std::vector<double>{1.0}), StatsError);

  std::vector<double> diffs{1, 2, 3};
  REQUIRE(paired_z(diffs) == Catch::Approx(2.0 * std::sqrt(3.0)));
}

TEST_CASE("effective sample size from log weights") {
  std::vector<double> flat(500, -3.7);
  REQUIRE(effective_sample_size(flat) == Catch::Approx(500.0));

  std::vector<double> skew{0.0, -40.0, -40.0, -40.0};
  REQUIRE(effective_sample_size(skew) == Catch::Approx(1.0).epsilon(1e-12));

  std::vector<double> lw{0.0, -1.0, -2.0};
  std::vector<double> shifted{100.0, 99.0, 98.0};
  REQUIRE(effective_sample_size(lw) ==
          Catch::Approx(effective_sample_size(shifted)));
}

TEST_CASE("Kolmogorov tail and critical values match the classical table") {
  REQUIRE(ks_tail(1.3581) == Catch::Approx(0.05).margin(2e-4));
  REQUIRE(ks_tail(1.22385) == Catch::Approx(0.10).margin(5e-4));
  REQUIRE(ks_tail(1.62762) == Catch::Approx(0.01).margin(2e-4));
  REQUIRE(ks_critical(0.05) == Catch::Approx(1.3581).margin(1e-3));
  REQUIRE(ks_critical(0.0027) == Catch::Approx(1.8176).margin(1e-3));
  REQUIRE(ks_tail(0.0) == 1.0);
  REQUIRE_THROWS_AS(ks_critical(0.0), StatsError);
}

TEST_CASE("two-sample KS statistic on a hand-computed pair") {
  std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y{1.5, 2.5, 3.5};
  KsResult r = ks_two_sample(x, y);
  REQUIRE(r.statistic == Catch::Approx(0.25));
  REQUIRE(r.scaled == Catch::Approx(0.25 * std::sqrt(12.0 / 7.0)));

  KsResult same = ks_two_sample(x, x);
  REQUIRE(same.statistic == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("two-sample KS separates shifted Gaussians and accepts equal ones") {
  SeedStream rng(501, 0, "ks-sampling");
  const int n = 2000;
  std::vector<double> a(n), b(n), c(n);
  for (int i = 0; i < n; ++i) {
    a[i] = rng.next_gaussian();
    b[i] = rng.next_gaussian();
    c[i] = rng.next_gaussian() + 0.3;
  }
  REQUIRE(ks_two_sample(a, b).scaled < ks_critical(0.0027));
  REQUIRE(ks_two_sample(a, c).p_value < 1e-4);
}

TEST_CASE("Wasserstein-1 on point masses and weighted samples") {
  REQUIRE(wasserstein1({0.0}, {1.0}) == Catch::Approx(1.0));
  REQUIRE(wasserstein1({0.0, 1.0}, {0.5}) == Catch::Approx(0.5));
  REQUIRE(wasserstein1({0.0, 1.0}, {0.75, 0.25}, {0.5}, {1.0}) ==
          Catch::Approx(0.5));
  REQUIRE(wasserstein1({0.0, 1.0}, {0.5}) ==
          Catch::Approx(wasserstein1({0.5}, {0.0, 1.0})));
  REQUIRE_THROWS_AS(wasserstein1({0.0}, {1.0, 2.0}, {1.0}, {1.0}), StatsError);
}

TEST_CASE("Wasserstein-1 recovers a Gaussian mean shift") {
  SeedStream rng(502, 0, "w1-sampling");
  const int n = 20'000;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = rng.next_gaussian();
    b[i] = rng.next_gaussian() + 0.5;
  }
  REQUIRE(wasserstein1(a, b) == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("energy statistic matches a direct evaluation") {
  Eigen::MatrixXd x(3, 2), y(2, 2);
  x << 0, 0, 1, 0, 0, 1;
  y << 2, 2, 3, 1;
  double a = 0, b = 0, c = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) a += (x.row(i) - y.row(j)).norm();
  a /= 6.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) b += (x.row(i) - x.row(j)).norm();
  b /= 3.0;
  c = (y.row(0) - y.row(1)).norm();
  SeedStream rng(503, 0, "energy-direct");
  EnergyResult r = energy_test(x, y, 20, rng);
  REQUIRE(r.statistic == Catch::Approx(2.0 * a - b - c).epsilon(1e-12));
}

TEST_CASE("energy permutation test separates distributions") {
  SeedStream rng(504, 0, "energy-sampling");
  const int n = 150;
  Eigen::MatrixXd a(n, 2), b(n, 2), c(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      a(i, j) = rng.next_gaussian();
      b(i, j) = rng.next_gaussian();
      c(i, j) = rng.next_gaussian() + 1.0;
    }
  SeedStream perm1(504, 1, "energy-perm-null");
  REQUIRE(energy_test(a, b, 500, perm1).p_value > 0.01);
  SeedStream perm2(504, 2, "energy-perm-alt");
  REQUIRE(energy_test(a, c, 500, perm2).p_value < 0.01);
}

TEST_CASE("least squares on hand-computed points") {
  FitResult exact = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
  REQUIRE(exact.slope == Catch::Approx(2.0));
  REQUIRE(exact.intercept == Catch::Approx(1.0));
  REQUIRE(exact.slope_se == Catch::Approx(0.0).margin(1e-10));

  FitResult f = least_squares({0, 1, 2}, {0, 1, 3});
  REQUIRE(f.slope == Catch::Approx(1.5));
  REQUIRE(f.intercept == Catch::Approx(-1.0 / 6.0));
  REQUIRE(f.slope_se == Catch::Approx(std::sqrt(1.0 / 12.0)));

  FitResult w = weighted_least_squares({0, 1, 2}, {0, 1, 3}, {1, 1, 4});
  REQUIRE(w.slope == Catch::Approx(11.0 / 7.0));
  REQUIRE(w.intercept == Catch::Approx(-4.0 / 21.0));

  REQUIRE_THROWS_AS(least_squares({0, 1}, {0, 1}), StatsError);
  REQUIRE_THROWS_AS(weighted_least_squares({0, 1, 2}, {0, 1, 2}, {1, 0, 1}),
                    StatsError);
  REQUIRE_THROWS_AS(least_squares({1, 1, 1}, {0, 1, 2}), StatsError);
}

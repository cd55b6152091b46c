#include "doctest.h"
#include "wgdiff/core.hpp"

#include <numbers>
#include <vector>

using namespace wgdiff;

TEST_CASE("unit ball volumes and sphere areas") {
  CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
  CHECK(unit_ball_volume(2) == doctest::Approx(std::numbers::pi));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * std::numbers::pi / 3.0));
  CHECK(unit_sphere_area(1) == doctest::Approx(2.0));
  CHECK(unit_sphere_area(2) == doctest::Approx(2.0 * std::numbers::pi));
  CHECK(unit_sphere_area(3) == doctest::Approx(4.0 * std::numbers::pi));
}

TEST_CASE("pairwise sum is exact on representable data and order-stable") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(pairwise_sum(v) == pairwise_sum(v));
}

TEST_CASE("log-log fit recovers a power law") {
  std::vector<double> x{1, 2, 4, 8, 16}, y;
  for (double xi : x) y.push_back(3.0 * xi * xi);
  const auto fit = fit_loglog(x, y);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.rms_residual < 1e-12);
}

TEST_CASE("median and quantiles") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(quantile({0, 1, 2, 3, 4}, 0.25) == doctest::Approx(1.0));
  CHECK(quantile({0, 10}, 0.5) == doctest::Approx(5.0));
}

#include "doctest.h"
#include "wgdiff/energy.hpp"
#include "wgdiff/metric.hpp"

#include <cmath>
#include <random>

using namespace wgdiff;

TEST_CASE("segment quadrature examples") {
  const auto one = ScalarField::constant(1.0);
  for (int n : {1, 3, 10, 57})
    CHECK(segment_weight({0, 0, 0}, {0.6, 0.8, 0}, one, {n, QuadratureRule::Trapezoid}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(segment_weight({0, 0, 0}, {1, 0, 0}, one, {10, QuadratureRule::PaperLiteral}) == doctest::Approx(1.1).epsilon(1e-14));
  const auto ramp = ScalarField::affine({{1.0, 0, 0}, 1.0});
  CHECK(std::abs(segment_weight({0, 0, 0}, {1, 0, 0}, ramp, {100, QuadratureRule::Trapezoid}) - 1.5) < 1e-4);
}

TEST_CASE("trapezoid quadrature converges at second order") {
  const auto g = ScalarField::sigmoid_radial({3.0, 0.6, 0.5});
  const Point x{-0.2, 0.1, 0.0}, y{0.9, 0.7, 0.0};
  const double exact = segment_weight(x, y, g, {4096, QuadratureRule::Trapezoid});
  const double e8 = std::abs(segment_weight(x, y, g, {8, QuadratureRule::Trapezoid}) - exact);
  const double e16 = std::abs(segment_weight(x, y, g, {16, QuadratureRule::Trapezoid}) - exact);
  CHECK(e8 / e16 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("segment_in_domain examples") {
  const auto box = Domain::unit_box(2);
  CHECK(segment_in_domain({0.1, 0.1, 0}, {0.9, 0.8, 0}, box, 16));
  // Balls of radius 0.5 centered at x = -0.4 and x = 0.4.
  const auto two = Domain::voxel_mask(make_two_ball_mask(2, 40, 0.5, 0.8));
  const Point left{-0.4, 0.45, 0}, right{0.4, 0.45, 0};
  REQUIRE(two.contains(left));
  REQUIRE(two.contains(right));
  CHECK_FALSE(two.contains({0.0, 0.45, 0}));
  CHECK_FALSE(segment_in_domain(left, right, two, 64));
  CHECK(segment_in_domain({-0.4, 0, 0}, {0.4, 0, 0}, two, 64));
  const auto l = Domain::voxel_mask(make_l_shape_mask(40));
  CHECK_FALSE(segment_in_domain({0.25, 0.9, 0}, {0.9, 0.25, 0}, l, 64));
  CHECK(segment_in_domain({0.25, 0.9, 0}, {0.25, 0.1, 0}, l, 64));
}

TEST_CASE("grid oracle with constant cost") {
  const auto box = Domain::unit_box(2);
  const GridMetricOracle oracle(box, ScalarField::constant(2.0), 0.01, 2);
  CHECK(std::abs(oracle.distance({0.1, 0.5, 0}, {0.9, 0.5, 0}) - 1.6) < 1e-9);
  const double d = oracle.distance({0.1, 0.1, 0}, {0.8, 0.4, 0});
  const double exact = 2.0 * std::hypot(0.7, 0.3);
  CHECK(d >= exact - 1e-9);
  // Worst case of the 8-neighbour stencil, reached near 22.5 degrees.
  CHECK(d <= std::sqrt(4.0 - 2.0 * std::sqrt(2.0)) * exact + 1e-9);
}

TEST_CASE("grid oracle line integral in 1-D") {
  const auto line = Domain::box(1, {0, 0, 0}, {1, 0, 0});
  const GridMetricOracle oracle(line, ScalarField::affine({{1.0, 0, 0}, 1.0}), 1e-3, 1);
  for (double t : {0.25, 0.5, 1.0}) CHECK(std::abs(oracle.distance({0, 0, 0}, {t, 0, 0}) - (t + 0.5 * t * t)) < 2e-3);
  CHECK(std::abs(oracle.fast_marching_distance({0, 0, 0}, {1, 0, 0}) - 1.5) < 2e-3);
}

TEST_CASE("geodesics around the notch of an L-shaped mask") {
  const auto l = Domain::voxel_mask(make_l_shape_mask(100));
  const GridMetricOracle oracle(l, ScalarField::constant(1.0), 0.005, 3);
  const Point x{0.25, 0.85, 0}, y{0.85, 0.25, 0};
  const double d = oracle.distance(x, y);
  const double corner = 2.0 * std::hypot(0.25, 0.35);  // via the reentrant corner (0.5, 0.5)
  CHECK(d > distance(x, y) + 0.01);
  CHECK(d == doctest::Approx(corner).epsilon(0.03));
}

TEST_CASE("metric sandwich, symmetry and triangle inequality") {
  const auto box = Domain::unit_box(2);
  const auto g = ScalarField::sigmoid_radial({3.0, 0.6, 0.5});
  const GridMetricOracle oracle(box, g, 0.01, 2);
  const auto bounds = estimate_bounds(g, box, 4000);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    const Point x = box.sample_uniform(rng), y = box.sample_uniform(rng), z = box.sample_uniform(rng);
    const double dxy = oracle.distance(x, y), dyx = oracle.distance(y, x);
    CHECK(std::abs(dxy - dyx) < 1e-12);
    const double tol = 0.05 * dxy + 0.02;
    CHECK(dxy >= bounds.g_lo * distance(x, y) - tol);
    CHECK(dxy <= bounds.g_hi * oracle.distance(x, y, true) + 1e-9);
    CHECK(oracle.distance(x, z) <= dxy + oracle.distance(y, z) + 1e-9);
    // Any path upper-bounds the infimum, the straight segment included. The
    // grid value carries the stencil's directional bias, measured with unit cost.
    const double bias = oracle.distance(x, y, true) / distance(x, y);
    CHECK(segment_weight(x, y, g, {256, QuadratureRule::Trapezoid}) >= dxy / bias - 0.01 * dxy);
  }
}

TEST_CASE("fast marching agrees with Dijkstra") {
  const auto box = Domain::unit_box(2);
  const auto g = ScalarField::sigmoid_radial({3.0, 0.6, 0.5});
  const GridMetricOracle oracle(box, g, 0.005, 3);
  const Point x{0.2, 0.3, 0}, y{0.85, 0.7, 0};
  CHECK(oracle.fast_marching_distance(x, y) == doctest::Approx(oracle.distance(x, y)).epsilon(0.02));
}

TEST_CASE("straight-line residual with constant g is grid error only") {
  const auto box = Domain::unit_box(2);
  const auto g = ScalarField::constant(1.3);
  const GridMetricOracle oracle(box, g, 0.01, 2);
  const auto bounds = estimate_bounds(g, box, 100);
  const auto r = check_straight_line_bound({0.2, 0.2, 0}, {0.5, 0.3, 0}, g, oracle, bounds);
  CHECK(r.corrected_residual < 1e-12);
  CHECK(r.residual <= r.grid_bias + 1e-12);
}

TEST_CASE("straight-line residual is quadratic and inside the envelope") {
  StraightLineSweepConfig c;
  c.g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  c.h = 2e-3;
  c.origins = {{0.5, 0.5, 0}};
  c.directions = 6;
  c.distances = {0.03, 0.05, 0.08, 0.13, 0.2};
  const auto sweep = straight_line_sweep(c);
  CHECK(sweep.corrected.fit_valid);
  CHECK(sweep.corrected.fit.slope >= 1.8);

  const GridMetricOracle oracle(c.domain, c.g, c.h, 3);
  const auto bounds = estimate_bounds(c.g, c.domain, 4000);
  for (double r : {0.05, 0.1, 0.2}) {
    const Point x = oracle.position(oracle.snap({0.5, 0.5, 0}));
    const Point y = oracle.position(oracle.snap({0.5 + 0.8 * r, 0.5 + 0.6 * r, 0}));
    const auto rep = check_straight_line_bound(x, y, c.g, oracle, bounds);
    CHECK(rep.corrected_residual <= rep.envelope);
  }
}

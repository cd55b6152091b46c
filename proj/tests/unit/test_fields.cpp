#include "doctest.h"
#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"

#include <cmath>
#include <numbers>

using namespace wgdiff;

namespace {
Point at_radius(double r) { return {r / std::sqrt(3.0), r / std::sqrt(3.0), r / std::sqrt(3.0)}; }
}  // namespace

TEST_CASE("sigmoid-radial examples") {
  CHECK(eval_sigmoid_radial(at_radius(1.0), {4.0, 1.0, 0.5}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(eval_sigmoid_radial({0, 0, 0}, {1.0, 0.0, 0.0}) == doctest::Approx(0.5));
  const double expected = 1.0 / (1.0 + std::exp(2.0)) + 0.1;
  CHECK(eval_sigmoid_radial({2.0, 0, 0}, {2.0, 1.0, 0.1}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.219203).epsilon(1e-6));
}

TEST_CASE("cosine-radial examples") {
  CHECK(eval_cosine_radial({1.0, 0, 0}, {0.3, 2.0, 1.0, 0.5}) == doctest::Approx(0.2).epsilon(1e-14));
  const double r = 1.0 + std::numbers::pi / 2.0;
  CHECK(eval_cosine_radial({0, r, 0}, {0.3, 2.0, 1.0, 0.5}) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(eval_cosine_radial({0, 0, 1.0}, {0.2, 1.0, 0.0, 0.6}) == doctest::Approx(0.491939).epsilon(1e-6));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(ScalarField::sigmoid_radial({-1.0, 1.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(ScalarField::sigmoid_radial({1.0, 1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(ScalarField::cosine_radial({0.5, 1.0, 1.0, 0.4}), ConfigError);
  CHECK_THROWS_AS(ScalarField::gaussian({{0, 0, 0}, 1.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("gradient_fd examples") {
  const auto g = gradient_fd(ScalarField::constant(3.0), {0.2, 0.4, 0.0}, 1e-4, 2).gradient;
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  const auto lin = ScalarField::affine({{1.0, 0.0, 0.0}, 0.0});
  const auto gl = gradient_fd(lin, {0.3, -0.7, 1.1}, 1e-4, 3).gradient;
  CHECK(gl[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(gl[1]) < 1e-8);
  CHECK(std::abs(gl[2]) < 1e-8);
  const auto sig = ScalarField::sigmoid_radial({3.0, 1.0, 0.5});
  const auto gs = gradient_fd(sig, at_radius(1.0), 1e-4, 3).gradient;
  CHECK(norm(gs) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("gradient_fd error is second order") {
  const auto sig = ScalarField::sigmoid_radial({2.0, 1.0, 0.5});
  const Point p{0.6, 0.5, 0.2};
  const double r = norm(p);
  const double s = 1.0 / (1.0 + std::exp(2.0 * (r - 1.0)));
  const double dr = -2.0 * s * (1.0 - s);
  auto err = [&](double h) {
    const auto g = gradient_fd(sig, p, h, 3).gradient;
    double e = 0.0;
    for (int a = 0; a < 3; ++a) e = std::max(e, std::abs(g[a] - dr * p[a] / r));
    return e;
  };
  CHECK(err(0.02) / err(0.01) >= 3.5);
}

TEST_CASE("gradient_fd falls back to one-sided stencils at the boundary") {
  const auto box = Domain::unit_box(2);
  const auto lin = ScalarField::affine({{2.0, -1.0, 0.0}, 0.0});
  const auto r = gradient_fd(lin, {0.0, 0.5, 0.0}, 1e-3, 2, &box);
  CHECK(r.one_sided);
  CHECK(r.gradient[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.gradient[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("estimate_bounds examples") {
  const auto box = Domain::unit_box(2);
  const auto c = estimate_bounds(ScalarField::constant(1.7), box, 500);
  CHECK(c.g_lo == doctest::Approx(1.7));
  CHECK(c.g_hi == doctest::Approx(1.7));
  CHECK(c.lip_g == 0.0);
  CHECK(c.lambda == doctest::Approx(2.0));

  const auto big = Domain::ball(2, {0, 0, 0}, 4.0);
  const auto s = estimate_bounds(ScalarField::sigmoid_radial({8.0, 1.0, 0.5}), big, 20000);
  CHECK(s.g_hi == doctest::Approx(1.5).epsilon(0.02));
  CHECK(s.g_lo == doctest::Approx(0.5).epsilon(0.01));

  // Radii 0..4 cover a full period of cos(pi - 2 (r - 1)).
  const auto wide = Domain::box(2, {0, 0, 0}, {4.0, 4.0, 0});
  const auto cr = estimate_bounds(ScalarField::cosine_radial({0.2, 2.0, 1.0, 0.8}), wide, 20000);
  CHECK(cr.g_hi == doctest::Approx(1.0).epsilon(0.01));
  CHECK(cr.g_lo == doctest::Approx(0.6).epsilon(0.01));
  CHECK(cr.lambda >= 2.0);
}

TEST_CASE("positivity gate rejects nonpositive connectivity") {
  const auto box = Domain::unit_box(2);
  const auto b = estimate_bounds(ScalarField::affine({{1.0, 0.0, 0.0}, -0.5}), box, 500);
  CHECK_THROWS_AS(require_positive_connectivity(b), ConfigError);
  CHECK_NOTHROW(require_positive_connectivity(estimate_bounds(ScalarField::constant(1.0), box, 100)));
}

TEST_CASE("grid-sampled fields interpolate multilinearly") {
  GridSamples s;
  s.dim = 2;
  s.shape = {2, 2, 1};
  s.spacing = {1.0, 1.0, 1.0};
  s.values = {0.0, 1.0, 2.0, 3.0};  // f = x + 2y
  const auto f = ScalarField::grid_sampled(s);
  CHECK(f({0.25, 0.5, 0.0}) == doctest::Approx(1.25));
  CHECK(f({5.0, 5.0, 0.0}) == doctest::Approx(3.0));
}

TEST_CASE("evaluation is deterministic and copies share the evaluator") {
  const auto g = ScalarField::cosine_radial({});
  const auto h = g;
  const Point p{0.3, 0.1, -0.2};
  CHECK(g(p) == h(p));
  CHECK(g.scaled(2.0)(p) == doctest::Approx(2.0 * g(p)));
}

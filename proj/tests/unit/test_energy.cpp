#include "doctest.h"
#include "wgdiff/energy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace wgdiff;

namespace {

EnergyProblem unit_interval(ScalarField g, ScalarField u) {
  EnergyProblem p{.domain = Domain::unit_box(1)};
  p.g = std::move(g);
  p.u = std::move(u);
  return p;
}

ScalarField identity_1d() { return ScalarField::affine({{1.0, 0.0, 0.0}, 0.0}); }

}  // namespace

TEST_CASE("sigma_eta closed forms") {
  const Kernel ind(KernelProfile::Indicator);
  CHECK(std::abs(sigma_eta(ind, 1).sigma_eta - 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(sigma_eta(ind, 2).sigma_eta - std::numbers::pi / 4.0) < 1e-9);
  CHECK(std::abs(sigma_eta(ind, 3).sigma_eta - 4.0 * std::numbers::pi / 15.0) < 1e-9);
  CHECK(std::abs(sigma_eta(Kernel(KernelProfile::Triangular), 1).sigma_eta - 1.0 / 6.0) < 1e-9);
  // exp-square: the unit-ball moment differs from the full-space one.
  const auto e = sigma_eta(Kernel(KernelProfile::ExpSquare), 1);
  CHECK(e.full_space == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-9));
  CHECK(e.sigma_eta < e.full_space);
}

TEST_CASE("local energy examples") {
  CHECK(local_energy(unit_interval(ScalarField::constant(1.0), identity_1d())).value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(local_energy(unit_interval(ScalarField::constant(2.0), identity_1d())).value == doctest::Approx(0.125).epsilon(1e-9));
  EnergyProblem p{.domain = Domain::unit_box(2)};
  p.u = ScalarField::affine({{1.0, 1.0, 0.0}, 0.0});
  CHECK(local_energy(p).value == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("nonlocal energy examples") {
  auto p = unit_interval(ScalarField::constant(1.0), ScalarField::constant(3.0));
  const auto zero = nonlocal_energy_mc(p, 0.05, 5000, 1);
  CHECK(zero.value == 0.0);
  CHECK(zero.std_error == 0.0);
  CHECK(nonlocal_energy_quadrature(p, 0.05) == 0.0);

  p.u = identity_1d();
  const double quad = nonlocal_energy_quadrature(p, 0.01);
  const auto mc = nonlocal_energy_mc(p, 0.01, 200000, 2);
  CHECK(std::abs(mc.value - quad) < 3.0 * mc.std_error);
  CHECK(std::abs(mc.value - 1.0) < 0.05);

  auto scaled = p;
  scaled.u = ScalarField::affine({{-2.0, 0.0, 0.0}, 0.5});
  const auto mc2 = nonlocal_energy_mc(scaled, 0.01, 200000, 2);
  CHECK(mc2.value == doctest::Approx(4.0 * mc.value).epsilon(1e-12));
  CHECK_THROWS_AS(nonlocal_energy_mc(p, 0.01, 10, 2), ConfigError);
}

TEST_CASE("energies ignore constant shifts and scale with rho squared") {
  EnergyProblem p{.domain = Domain::unit_box(2)};
  p.g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  p.u = ScalarField::sine({0, 1.0, 2.0, 0.3});
  p.rho = ScalarField::constant(1.0);
  const double eps = 0.1;
  const double inl = nonlocal_energy_quadrature(p, eps);
  const double il = local_energy(p).value;

  auto shifted = p;
  shifted.u = ScalarField::custom([u = p.u](const Point& x) { return u(x) + 5.0; });
  CHECK(nonlocal_energy_quadrature(shifted, eps) == doctest::Approx(inl).epsilon(1e-12));
  CHECK(local_energy(shifted).value == doctest::Approx(il).epsilon(1e-9));

  auto heavy = p;
  heavy.rho = ScalarField::constant(3.0);
  CHECK(nonlocal_energy_quadrature(heavy, eps) == doctest::Approx(9.0 * inl).epsilon(1e-12));
  CHECK(local_energy(heavy).value == doctest::Approx(9.0 * il).epsilon(1e-9));
  const auto mc1 = nonlocal_energy_mc(p, eps, 2000, 4);
  const auto mc3 = nonlocal_energy_mc(heavy, eps, 2000, 4);
  CHECK(mc3.value == doctest::Approx(9.0 * mc1.value).epsilon(1e-12));
}

TEST_CASE("Monte Carlo estimator is unbiased for the quadrature value") {
  EnergyProblem p{.domain = Domain::unit_box(2)};
  p.g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  p.u = ScalarField::sine({0, 1.0, 2.0, 0.3});
  const double eps = 0.1;
  const double quad = nonlocal_energy_quadrature(p, eps);
  std::vector<double> est;
  for (std::uint64_t s = 0; s < 50; ++s) est.push_back(nonlocal_energy_mc(p, eps, 4000, 1000 + s, {64}).value);
  double mean = 0.0, ss = 0.0;
  for (double v : est) mean += v / 50.0;
  for (double v : est) ss += (v - mean) * (v - mean);
  const double z = (mean - quad) / std::sqrt(ss / 49.0 / 50.0);
  CHECK(std::abs(z) < 4.0);
}

TEST_CASE("nonlocal-vs-local rate examples") {
  NonlocalVsLocalConfig c{.problem = unit_interval(ScalarField::constant(1.0), ScalarField::constant(1.0))};
  c.eps_values = {0.01, 0.02, 0.04, 0.08};
  const auto zero = rate_experiment_nonlocal_vs_local(c);
  for (double g : zero.gap) CHECK(g == 0.0);

  // Linear u with constant g and rho: the whole gap is the boundary deficit.
  c.problem.u = identity_1d();
  const auto full = rate_experiment_nonlocal_vs_local(c);
  c.exclude_boundary_band = true;
  const auto interior = rate_experiment_nonlocal_vs_local(c);
  for (std::size_t i = 0; i < full.gap.size(); ++i) CHECK(interior.gap[i] * 5.0 <= full.gap[i]);
  CHECK(full.fit.slope == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("discrete-vs-nonlocal examples") {
  DiscreteVsNonlocalConfig c{.problem = unit_interval(ScalarField::sigmoid_radial({2.0, 0.5, 0.5}), ScalarField::constant(2.0))};
  c.n_values = {200, 400, 800, 1600, 3200};
  c.fixed_eps = 0.1;
  c.seeds = 20;
  const auto zero = rate_experiment_discrete_vs_nonlocal(c);
  for (double g : zero.gap) CHECK(g == 0.0);

  c.problem.u = ScalarField::sine({0, 1.0, 2.0, 0.0});
  const auto r = rate_experiment_discrete_vs_nonlocal(c);
  for (std::size_t i = 1; i < r.gap.size(); ++i) CHECK(r.gap[i] < r.gap[i - 1]);

  auto c3 = c;
  c3.problem.u = ScalarField::sine({0, 3.0, 2.0, 0.0});
  c3.n_values = {100, 200};
  auto c1 = c;
  c1.n_values = {100, 200};
  const auto r1 = rate_experiment_discrete_vs_nonlocal(c1);
  const auto r3 = rate_experiment_discrete_vs_nonlocal(c3);
  for (std::size_t i = 0; i < r1.gap.size(); ++i) CHECK(r3.gap[i] == doctest::Approx(9.0 * r1.gap[i]).epsilon(1e-9));
}

TEST_CASE("rate csv layout") {
  RateReport r;
  r.sweep = {0.1, 0.2};
  r.gap = {1.0, 2.0};
  r.std_error = {0.0, 0.5};
  std::ostringstream out;
  write_rate_csv(out, r);
  CHECK(out.str() == "sweep_value,gap,stderr\n0.10000000000000001,1,0\n0.20000000000000001,2,0.5\n");
}

TEST_CASE("W11 limit examples") {
  const auto box = Domain::unit_box(2);
  const std::vector<double> eps{0.08, 0.04, 0.02, 0.01, 0.005};
  const auto one = ScalarField::constant(1.0);
  const auto c = w11_limit_check(ScalarField::constant(2.0), one, box, eps);
  CHECK(c.limit == 0.0);
  for (double v : c.smoothed) CHECK(v == 0.0);

  const auto lin = w11_limit_check(ScalarField::affine({{0.3, 0.4, 0.0}, 1.0}), one, box, eps);
  CHECK(lin.limit == doctest::Approx(0.5).epsilon(1e-6));
  for (double v : lin.smoothed) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));

  // The ball radius is 4 lambda eps / g_lo, roughly 22 eps here, so the sweep
  // has to go well below the cell size before the sup settles.
  const std::vector<double> fine{0.02, 0.005, 0.002, 0.001, 0.0005};
  const auto s = w11_limit_check(ScalarField::sigmoid_radial({2.0, 0.5, 0.5}), one, box, fine, {128});
  CHECK(s.monotone);
  CHECK(s.final_gap < 0.01);
}

#include "doctest.h"
#include "wgdiff/energy.hpp"
#include "wgdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace wgdiff;

namespace {

PointCloud line_cloud(std::vector<double> xs) {
  PointCloud c;
  c.dim = 1;
  for (double x : xs) c.points.push_back({x, 0, 0});
  return c;
}

std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set(const EpsGraph& g) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> s;
  for (const auto& e : g.edges) s.insert({e.i, e.j});
  return s;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> u(n);
  for (auto& v : u) v = nd(rng);
  return u;
}

}  // namespace

TEST_CASE("eps scaling examples") {
  CHECK(eps_scaling(std::exp(1.0), 1, 1.0, EpsRule::PerD) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  // (ln 100 / 100)^(1/5) = 0.5403176281... by 40-digit evaluation.
  CHECK(eps_scaling(100, 3, 1.0, EpsRule::PerDPlus2) == doctest::Approx(0.5403176281672790).epsilon(1e-14));
  CHECK(eps_scaling(500, 2, 2.0, EpsRule::PerD) == doctest::Approx(2.0 * eps_scaling(500, 2, 1.0, EpsRule::PerD)));
}

TEST_CASE("kernels") {
  const Kernel e(KernelProfile::ExpSquare);
  CHECK(e.eta(0.3) == doctest::Approx(0.913931).epsilon(1e-6));
  CHECK(e.eta_inv(e.eta(0.7)) == doctest::Approx(0.7).epsilon(1e-12));
  const Kernel ind(KernelProfile::Indicator);
  CHECK(ind.eta(0.999) == 1.0);
  CHECK(ind.eta(1.0) == 0.0);
  CHECK_THROWS_AS(ind.eta_inv(1.0), NumericalError);
  const Kernel tri(KernelProfile::Triangular);
  CHECK(tri.eta_inv(tri.eta(0.25)) == doctest::Approx(0.25));
  CHECK(e.eta(e.support()) == doctest::Approx(Kernel::kWeightFloor).epsilon(1e-6));
  CHECK_THROWS_AS(Kernel::parse("gaussian-ish"), ConfigError);
}

TEST_CASE("three collinear points give one edge") {
  const auto g = build_graph(line_cloud({0.0, 0.4, 1.0}), 0.5, Kernel(KernelProfile::Indicator), ScalarField::constant(1.0));
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].i == 0);
  CHECK(g.edges[0].j == 1);
  CHECK(g.edges[0].dist == doctest::Approx(0.4));
}

TEST_CASE("doubling g halves the reach") {
  const auto cloud = sample_points(Domain::unit_box(2), ScalarField::constant(1.0), 300, 4);
  const Kernel k(KernelProfile::Indicator);
  const auto g2 = build_graph(cloud, 0.2, k, ScalarField::constant(2.0));
  const auto g1 = build_graph(cloud, 0.1, k, ScalarField::constant(1.0));
  CHECK(edge_set(g2) == edge_set(g1));
}

TEST_CASE("spatial index matches brute force") {
  const auto cloud = sample_points(Domain::unit_box(2), ScalarField::constant(1.0), 100, 9);
  const auto pairs = neighbour_pairs(cloud, 0.17);
  std::set<std::pair<std::uint32_t, std::uint32_t>> fast(pairs.begin(), pairs.end()), brute;
  for (std::uint32_t i = 0; i < 100; ++i)
    for (std::uint32_t j = i + 1; j < 100; ++j)
      if (distance(cloud.points[i], cloud.points[j]) < 0.17) brute.insert({i, j});
  CHECK(fast == brute);

  const auto g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  const Kernel k(KernelProfile::Triangular);
  const auto graph = build_graph(cloud, 0.12, k, g);
  std::set<std::pair<std::uint32_t, std::uint32_t>> expect;
  for (std::uint32_t i = 0; i < 100; ++i)
    for (std::uint32_t j = i + 1; j < 100; ++j)
      if (k.eta(segment_weight(cloud.points[i], cloud.points[j], g, {}) / 0.12) > 0.0) expect.insert({i, j});
  CHECK(edge_set(graph) == expect);
  for (const auto& e : graph.edges) CHECK(e.weight == doctest::Approx(k.eta(e.dist / 0.12)));
}

TEST_CASE("two-node energy and Laplacian") {
  const auto g = build_graph(line_cloud({0.0, 0.5}), 1.0, Kernel(KernelProfile::Indicator), ScalarField::constant(1.0));
  CHECK(g.sigma_eta == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  const std::vector<double> u{0.0, 0.5};
  CHECK(dirichlet_energy(g, u) == doctest::Approx(0.1875).epsilon(1e-9));
  const auto lu = graph_laplacian_apply(g, u);
  CHECK(lu[0] == doctest::Approx(-0.75).epsilon(1e-9));
  CHECK(lu[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("energy invariants") {
  const auto cloud = sample_points(Domain::unit_box(2), ScalarField::constant(1.0), 400, 21);
  const auto graph = build_graph(cloud, 0.15, Kernel(KernelProfile::ExpSquare), ScalarField::sigmoid_radial({2.0, 0.5, 0.5}));
  const auto u = random_values(cloud.size(), 3);

  CHECK(dirichlet_energy(graph, std::vector<double>(cloud.size(), 2.5)) == 0.0);
  const auto l1 = graph_laplacian_apply(graph, std::vector<double>(cloud.size(), 1.0));
  CHECK(*std::max_element(l1.begin(), l1.end()) == 0.0);
  CHECK(*std::min_element(l1.begin(), l1.end()) == 0.0);

  const double e = dirichlet_energy(graph, u);
  CHECK(e > 0.0);
  std::vector<double> v(u);
  for (auto& x : v) x = -3.0 * x + 7.0;
  CHECK(dirichlet_energy(graph, v) == doctest::Approx(9.0 * e).epsilon(1e-12));

  const auto lu = graph_laplacian_apply(graph, u);
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * lu[i];
  CHECK(std::abs(dot / static_cast<double>(u.size()) - e) <= 1e-12 * std::max(1.0, e));

  // Relabeling the nodes leaves the energy unchanged.
  std::vector<std::size_t> perm(cloud.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  PointCloud shuffled = cloud;
  std::vector<double> up(u.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.points[i] = cloud.points[perm[i]];
    up[i] = u[perm[i]];
  }
  const auto gp = build_graph(shuffled, 0.15, Kernel(KernelProfile::ExpSquare), ScalarField::sigmoid_radial({2.0, 0.5, 0.5}));
  CHECK(std::abs(dirichlet_energy(gp, up) - e) <= 1e-12 * e);
}

TEST_CASE("segment and grid-oracle backends agree as the grid is refined") {
  const auto box = Domain::unit_box(2);
  const auto g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  const auto cloud = sample_points(box, ScalarField::constant(1.0), 150, 13);
  const Kernel k(KernelProfile::ExpSquare);
  std::vector<double> u(cloud.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(3.0 * cloud.points[i][0]) + cloud.points[i][1];
  const double seg = dirichlet_energy(build_graph(cloud, 0.08, k, g), u);
  std::vector<double> rel;
  for (double h : {0.01, 0.005}) {
    const GridMetricOracle oracle(box, g, h, 3);
    GraphOptions o;
    o.backend = MetricBackend::GridOracle;
    o.oracle = &oracle;
    rel.push_back(std::abs(dirichlet_energy(build_graph(cloud, 0.08, k, g, o), u) - seg) / seg);
  }
  CHECK(rel[1] < rel[0]);
  CHECK(rel[1] < 0.1);
}

TEST_CASE("edge list export") {
  const auto g = build_graph(line_cloud({0.0, 0.4, 1.0}), 0.5, Kernel(KernelProfile::Indicator), ScalarField::constant(1.0));
  std::ostringstream out;
  write_edge_list(out, g);
  CHECK(out.str() == "# n=3 d=1 eps=0.5 kernel=indicator backend=segment\n0 1 0.40000000000000002 1\n");
}

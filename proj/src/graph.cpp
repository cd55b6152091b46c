#include "wgdiff/graph.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "wgdiff/energy.hpp"

namespace wgdiff {

Kernel Kernel::parse(const std::string& name) {
  if (name == "exp-square") return Kernel(KernelProfile::ExpSquare);
  if (name == "indicator") return Kernel(KernelProfile::Indicator);
  if (name == "triangular") return Kernel(KernelProfile::Triangular);
  throw ConfigError("unknown kernel profile '" + name + "'");
}

std::string Kernel::name() const {
  switch (profile_) {
    case KernelProfile::ExpSquare: return "exp-square";
    case KernelProfile::Indicator: return "indicator";
    case KernelProfile::Triangular: return "triangular";
  }
  return "indicator";
}

double Kernel::eta(double t) const {
  switch (profile_) {
    case KernelProfile::ExpSquare: return std::exp(-t * t);
    case KernelProfile::Indicator: return t < 1.0 ? 1.0 : 0.0;
    case KernelProfile::Triangular: return t < 1.0 ? 1.0 - t : 0.0;
  }
  return 0.0;
}

double Kernel::eta_inv(double w) const {
  switch (profile_) {
    case KernelProfile::ExpSquare:
      if (!(w > 0.0 && w <= 1.0)) throw NumericalError("exp-square kernel: weight outside (0, 1]");
      return std::sqrt(-std::log(w));
    case KernelProfile::Triangular:
      if (!(w > 0.0 && w <= 1.0)) throw NumericalError("triangular kernel: weight outside (0, 1]");
      return 1.0 - w;
    case KernelProfile::Indicator: break;
  }
  throw NumericalError("indicator kernel is not invertible");
}

double Kernel::support() const {
  if (profile_ == KernelProfile::ExpSquare) return std::sqrt(-std::log(kWeightFloor));
  return 1.0;
}

std::string to_string(EpsRule rule) { return rule == EpsRule::PerD ? "per-d" : "per-d-plus-2"; }

EpsRule parse_eps_rule(const std::string& name) {
  if (name == "per-d") return EpsRule::PerD;
  if (name == "per-d-plus-2") return EpsRule::PerDPlus2;
  throw ConfigError("unknown eps rule '" + name + "'");
}

double eps_scaling(double n, int dim, double scale, EpsRule rule) {
  if (!(n >= 2.0)) throw ConfigError("eps_scaling: n must be >= 2");
  if (!(scale > 0.0)) throw ConfigError("eps_scaling: C must be > 0");
  const double exponent = rule == EpsRule::PerD ? 1.0 / dim : 1.0 / (dim + 2);
  return scale * std::pow(std::log(n) / n, exponent);
}

std::string to_string(MetricBackend backend) {
  switch (backend) {
    case MetricBackend::Euclidean: return "euclidean";
    case MetricBackend::Segment: return "segment";
    case MetricBackend::GridOracle: return "grid-oracle";
  }
  return "segment";
}

MetricBackend parse_metric_backend(const std::string& name) {
  if (name == "euclidean") return MetricBackend::Euclidean;
  if (name == "segment") return MetricBackend::Segment;
  if (name == "grid-oracle") return MetricBackend::GridOracle;
  throw ConfigError("unknown metric backend '" + name + "'");
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> neighbour_pairs(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw ConfigError("neighbour_pairs: radius must be > 0");
  const int dim = cloud.dim;
  const std::size_t n = cloud.size();
  Point lo{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud.points) lo[a] = std::min(lo[a], p[a]);
  }
  // Uniform cell grid with cell size = radius; a pair within radius lies in
  // neighbouring cells.
  const auto cell_of = [&](const Point& p) {
    std::array<std::int64_t, 3> c{0, 0, 0};
    for (int a = 0; a < dim; ++a) c[a] = static_cast<std::int64_t>(std::floor((p[a] - lo[a]) / radius));
    return c;
  };
  const auto key = [](const std::array<std::int64_t, 3>& c) {
    return (c[0] * 73856093) ^ (c[1] * 19349663) ^ (c[2] * 83492791);
  };
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells;
  std::vector<std::array<std::int64_t, 3>> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    cell[i] = cell_of(cloud.points[i]);
    cells[key(cell[i])].push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<std::uint32_t> found;
  for (std::size_t i = 0; i < n; ++i) {
    found.clear();
    for (int dk = (dim > 2 ? -1 : 0); dk <= (dim > 2 ? 1 : 0); ++dk)
      for (int dj = (dim > 1 ? -1 : 0); dj <= (dim > 1 ? 1 : 0); ++dj)
        for (int di = -1; di <= 1; ++di) {
          const std::array<std::int64_t, 3> c{cell[i][0] + di, cell[i][1] + dj, cell[i][2] + dk};
          const auto it = cells.find(key(c));
          if (it == cells.end()) continue;
          for (const auto j : it->second) {
            if (j <= i || cell[j] != c) continue;  // hash collisions share buckets
            if (distance(cloud.points[i], cloud.points[j]) < radius) found.push_back(j);
          }
        }
    std::sort(found.begin(), found.end());
    for (const auto j : found) pairs.emplace_back(static_cast<std::uint32_t>(i), j);
  }
  return pairs;
}

EpsGraph build_graph(const PointCloud& cloud, double eps, const Kernel& kernel, const ScalarField& g,
                     const GraphOptions& options) {
  if (!(eps > 0.0)) throw ConfigError("build_graph: eps must be > 0");
  if (cloud.size() < 2) throw ConfigError("build_graph: need at least two points");
  EpsGraph graph;
  graph.cloud = cloud;
  graph.eps = eps;
  graph.kernel = kernel;
  graph.backend = options.backend;
  graph.sigma_eta = sigma_eta(kernel, cloud.dim).sigma_eta;

  double g_lo = 1.0;
  if (options.backend != MetricBackend::Euclidean) {
    if (options.g_lo) {
      g_lo = *options.g_lo;
    } else {
      g_lo = std::numeric_limits<double>::infinity();
      for (const auto& p : cloud.points) g_lo = std::min(g_lo, g(p));
      if (options.domain) g_lo = std::min(g_lo, estimate_bounds(g, *options.domain, 4000).g_lo);
      g_lo *= 0.9;
    }
    if (!(g_lo > 0.0)) throw ConfigError("build_graph: connectivity lower bound must be > 0");
  }
  if (options.backend == MetricBackend::GridOracle && options.oracle == nullptr)
    throw ConfigError("build_graph: grid-oracle backend needs an oracle");

  const double reach = kernel.support() * eps;
  const auto pairs = neighbour_pairs(cloud, reach / g_lo);

  std::size_t cached_source = std::numeric_limits<std::size_t>::max();
  std::vector<double> labels;
  for (const auto& [i, j] : pairs) {
    const Point& x = cloud.points[i];
    const Point& y = cloud.points[j];
    double d = 0.0;
    switch (options.backend) {
      case MetricBackend::Euclidean: d = distance(x, y); break;
      case MetricBackend::Segment:
        if (options.domain && !segment_in_domain(x, y, *options.domain, options.segment_checks)) continue;
        d = segment_weight(x, y, g, options.quadrature);
        break;
      case MetricBackend::GridOracle:
        if (cached_source != i) {
          labels = options.oracle->distances_from(x, reach * 1.05);
          cached_source = i;
        }
        d = labels[options.oracle->snap(y)];
        break;
    }
    const double t = d / eps;
    if (!(t < kernel.support())) continue;
    const double w = kernel.eta(t);
    if (kernel.compact() ? !(w > 0.0) : !(w > Kernel::kWeightFloor)) continue;
    graph.edges.push_back({i, j, d, w});
  }
  return graph;
}

namespace {

double energy_scale(const EpsGraph& graph) {
  const int d = graph.cloud.dim;
  return graph.sigma_eta * std::pow(graph.eps, d + 2);
}

}  // namespace

double dirichlet_energy(const EpsGraph& graph, std::span<const double> u) {
  if (u.size() != graph.size()) throw ConfigError("dirichlet_energy: one value per node required");
  std::vector<double> terms(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const double du = u[edge.i] - u[edge.j];
    terms[e] = edge.weight * du * du;
  }
  const double n = static_cast<double>(graph.size());
  // Each unordered edge appears twice in the double sum over (i, j).
  return 2.0 * pairwise_sum(terms) / (energy_scale(graph) * n * n);
}

std::vector<double> graph_laplacian_apply(const EpsGraph& graph, std::span<const double> u) {
  if (u.size() != graph.size()) throw ConfigError("graph_laplacian_apply: one value per node required");
  std::vector<double> out(graph.size(), 0.0);
  for (const auto& edge : graph.edges) {
    const double flux = edge.weight * (u[edge.i] - u[edge.j]);
    out[edge.i] += flux;
    out[edge.j] -= flux;
  }
  const double factor = 2.0 / (energy_scale(graph) * static_cast<double>(graph.size()));
  for (auto& v : out) v *= factor;
  return out;
}

void write_edge_list(std::ostream& out, const EpsGraph& graph) {
  out.precision(17);
  out << "# n=" << graph.size() << " d=" << graph.cloud.dim << " eps=" << graph.eps
      << " kernel=" << graph.kernel.name() << " backend=" << to_string(graph.backend) << "\n";
  for (const auto& e : graph.edges) out << e.i << ' ' << e.j << ' ' << e.dist << ' ' << e.weight << '\n';
  if (!out) throw IoError("edge list: write failed");
}

}  // namespace wgdiff

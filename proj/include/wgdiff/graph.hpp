#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"
#include "wgdiff/metric.hpp"

namespace wgdiff {

enum class KernelProfile { ExpSquare, Indicator, Triangular };

/// Radial kernel profile eta on [0, inf).
class Kernel {
 public:
  /// Weights below this are dropped for the non-compact exp-square profile.
  static constexpr double kWeightFloor = 1e-12;

  explicit Kernel(KernelProfile profile = KernelProfile::Indicator) : profile_(profile) {}
  static Kernel parse(const std::string& name);

  KernelProfile profile() const { return profile_; }
  std::string name() const;

  double eta(double t) const;
  /// Inverse on the kernel's invertible range; throws NumericalError outside it.
  double eta_inv(double w) const;
  bool invertible() const { return profile_ != KernelProfile::Indicator; }
  /// True for profiles that vanish on [1, inf).
  bool compact() const { return profile_ != KernelProfile::ExpSquare; }
  /// Largest t with eta(t) kept as an edge: 1 for compact profiles, the
  /// weight-floor radius for exp-square.
  double support() const;

 private:
  KernelProfile profile_;
};

/// eps = C (log n / n)^{1/d} or C (log n / n)^{1/(d+2)}.
enum class EpsRule { PerD, PerDPlus2 };

std::string to_string(EpsRule rule);
EpsRule parse_eps_rule(const std::string& name);

double eps_scaling(double n, int dim, double scale, EpsRule rule);

enum class MetricBackend { Euclidean, Segment, GridOracle };

std::string to_string(MetricBackend backend);
MetricBackend parse_metric_backend(const std::string& name);

struct Edge {
  std::uint32_t i;
  std::uint32_t j;  ///< i < j
  double dist;
  double weight;
};

struct GraphOptions {
  MetricBackend backend = MetricBackend::Segment;
  SegmentQuadrature quadrature{};
  /// Required for the grid-oracle backend.
  const GridMetricOracle* oracle = nullptr;
  /// When set, segment-backend pairs whose segment leaves the domain are dropped.
  const Domain* domain = nullptr;
  int segment_checks = 32;
  /// Lower bound on g used for the candidate radius. Estimated from the cloud
  /// (and the domain when given) with a 10% safety margin when absent.
  std::optional<double> g_lo;
};

/// Weighted eps-graph. Each unordered edge is stored once with i < j.
struct EpsGraph {
  PointCloud cloud;
  double eps = 0.0;
  Kernel kernel;
  MetricBackend backend = MetricBackend::Segment;
  double sigma_eta = 0.0;  ///< kernel moment in dimension cloud.dim
  std::vector<Edge> edges;

  std::size_t size() const { return cloud.size(); }
};

EpsGraph build_graph(const PointCloud& cloud, double eps, const Kernel& kernel, const ScalarField& g,
                     const GraphOptions& options = {});

/// Candidate pairs (i < j, |x_i - x_j| < radius) from the cell-grid index.
std::vector<std::pair<std::uint32_t, std::uint32_t>> neighbour_pairs(const PointCloud& cloud, double radius);

/// E_n[u] = (1 / (sigma n^2 eps^{d+2})) sum_{i,j} w_ij (u_i - u_j)^2.
double dirichlet_energy(const EpsGraph& graph, std::span<const double> u);

/// (L_n u)_i = (2 / (sigma n eps^{d+2})) sum_j w_ij (u_i - u_j).
std::vector<double> graph_laplacian_apply(const EpsGraph& graph, std::span<const double> u);

/// Text edge list: a '#'-prefixed header line, then one `i j d_ij w_ij` per edge.
void write_edge_list(std::ostream& out, const EpsGraph& graph);

}  // namespace wgdiff

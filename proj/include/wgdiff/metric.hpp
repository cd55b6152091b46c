#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"

namespace wgdiff {

enum class QuadratureRule {
  /// (|x-y|/N) * sum_{k=0..N} g(x + k/N (y-x)); overweights constants by (N+1)/N.
  PaperLiteral,
  /// Same nodes with halved endpoint weights; exact for constant fields.
  Trapezoid,
};

std::string to_string(QuadratureRule rule);
QuadratureRule parse_quadrature_rule(const std::string& name);

struct SegmentQuadrature {
  int steps = 16;
  QuadratureRule rule = QuadratureRule::Trapezoid;

  /// Weight of node k (without the |x-y| factor).
  double node_weight(int k) const {
    const double base = 1.0 / steps;
    if (rule == QuadratureRule::Trapezoid && (k == 0 || k == steps)) return 0.5 * base;
    return base;
  }
};

/// Approximates the g-weighted length of the straight segment [x, y].
double segment_weight(const Point& x, const Point& y, const ScalarField& g, const SegmentQuadrature& q);

/// True iff all `checks` equispaced samples of [x, y] (endpoints included) lie in the domain.
bool segment_in_domain(const Point& x, const Point& y, const Domain& domain, int checks);

/// Shortest-path approximation of the weighted distance on a regular lattice
/// covering the domain. Lattice node i sits at lower + i * h; nodes outside
/// the domain are inactive. Two solvers share the lattice: Dijkstra on a
/// multi-neighbour stencil (edge cost = mean endpoint g times edge length) and
/// first-order fast marching for the eikonal equation |grad T| = g.
class GridMetricOracle {
 public:
  /// stencil_order 1: axis neighbours; 2: axis + diagonals; 3: adds the
  /// (1,2)-type moves of a 16-neighbour (2-D) stencil.
  GridMetricOracle(const Domain& domain, const ScalarField& g, double h, int stencil_order = 2);

  double spacing() const { return h_; }
  int dim() const { return dim_; }
  std::size_t node_count() const { return cost_.size(); }
  std::size_t active_count() const;

  /// Nearest active lattice node; throws ConfigError when none lies within 2h.
  std::size_t snap(const Point& p) const;
  Point position(std::size_t node) const;
  bool active(std::size_t node) const { return active_[node] != 0; }
  double cost(std::size_t node) const { return cost_[node]; }

  /// Dijkstra distance between the snapped nodes. Throws NumericalError when
  /// y is unreachable. With unit_cost the g values are replaced by 1, which
  /// measures the stencil's own geometric bias.
  double distance(const Point& x, const Point& y, bool unit_cost = false) const;

  /// Dijkstra labels from the node nearest to `source`; settles nodes up to
  /// `cutoff` (infinity elsewhere).
  std::vector<double> distances_from(const Point& source, double cutoff = std::numeric_limits<double>::infinity(),
                                     bool unit_cost = false) const;

  /// First-order fast marching arrival times from the node nearest to `source`.
  std::vector<double> fast_marching_from(const Point& source) const;
  double fast_marching_distance(const Point& x, const Point& y) const;

 private:
  struct Move {
    std::array<int, 3> offset;
    double length;
  };

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(shape_[0]) * (j + static_cast<std::size_t>(shape_[1]) * k);
  }
  std::array<int, 3> coords(std::size_t node) const;
  bool edge_admissible(std::size_t a, std::size_t b) const;

  std::vector<double> dijkstra(std::size_t source, std::optional<std::size_t> target, double cutoff,
                               bool unit_cost) const;

  Domain domain_;
  int dim_;
  double h_;
  Point lower_;
  std::array<int, 3> shape_{1, 1, 1};
  std::vector<double> cost_;
  std::vector<std::uint8_t> active_;
  std::vector<Move> moves_;
};

/// Comparison of the grid distance with the straight-line surrogate g(x)|x-y|
/// and the locality envelope (eps^2 / g_lo^2) [6 lambda sup|grad g| + B g_hi].
struct StraightLineReport {
  double grid_distance = 0.0;     ///< Dijkstra value with g
  double unit_distance = 0.0;     ///< Dijkstra value with g = 1 on the same lattice
  double straight_value = 0.0;    ///< g(x) |x - y|
  double residual = 0.0;          ///< |grid_distance - straight_value|
  double grid_bias = 0.0;         ///< g(x) (unit_distance - |x - y|)
  double corrected_residual = 0.0;  ///< |grid_distance - g(x) unit_distance|
  double eps = 0.0;               ///< scale used in the envelope (= grid_distance)
  double sup_grad = 0.0;          ///< sampled sup |grad g| over B(x, 4 lambda eps / g_lo)
  double envelope = 0.0;
};

/// `domain_constant_b` is the boundary-regularity constant B (0 is exact for
/// convex domains).
StraightLineReport check_straight_line_bound(const Point& x, const Point& y, const ScalarField& g,
                                             const GridMetricOracle& oracle, const FieldBounds& bounds,
                                             double domain_constant_b = 0.0);

}  // namespace wgdiff

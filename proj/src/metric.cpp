#include "wgdiff/metric.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace wgdiff {

std::string to_string(QuadratureRule rule) {
  return rule == QuadratureRule::Trapezoid ? "trapezoid" : "paper-literal";
}

QuadratureRule parse_quadrature_rule(const std::string& name) {
  if (name == "trapezoid") return QuadratureRule::Trapezoid;
  if (name == "paper-literal") return QuadratureRule::PaperLiteral;
  throw ConfigError("unknown quadrature rule '" + name + "'");
}

double segment_weight(const Point& x, const Point& y, const ScalarField& g, const SegmentQuadrature& q) {
  if (q.steps < 1) throw ConfigError("segment quadrature needs at least one step");
  double acc = 0.0;
  for (int k = 0; k <= q.steps; ++k) {
    acc += q.node_weight(k) * g(lerp(x, y, static_cast<double>(k) / q.steps));
  }
  return distance(x, y) * acc;
}

bool segment_in_domain(const Point& x, const Point& y, const Domain& domain, int checks) {
  if (checks < 2) throw ConfigError("segment_in_domain: checks must be >= 2");
  for (int k = 0; k < checks; ++k) {
    if (!domain.contains(lerp(x, y, static_cast<double>(k) / (checks - 1)))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

GridMetricOracle::GridMetricOracle(const Domain& domain, const ScalarField& g, double h, int stencil_order)
    : domain_(domain), dim_(domain.dim()), h_(h), lower_(domain.lower()) {
  if (!(h > 0.0)) throw ConfigError("grid oracle: spacing must be > 0");
  if (stencil_order < 1 || stencil_order > 3) throw ConfigError("grid oracle: stencil order must be 1, 2 or 3");
  for (int a = 0; a < dim_; ++a) {
    const double extent = domain.upper()[a] - domain.lower()[a];
    shape_[a] = static_cast<int>(std::floor(extent / h + 1e-9)) + 1;
  }
  const std::size_t total = static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2];
  if (total > (std::size_t{1} << 27)) throw ConfigError("grid oracle: lattice too large");
  cost_.assign(total, 0.0);
  active_.assign(total, 0);
  for (std::size_t n = 0; n < total; ++n) {
    const Point p = position(n);
    if (!domain.contains(p)) continue;
    const double c = g(p);
    if (!(c > 0.0)) throw ConfigError("grid oracle: node costs must be positive");
    cost_[n] = c;
    active_[n] = 1;
  }

  const int reach = stencil_order == 3 ? 2 : 1;
  for (int dk = (dim_ > 2 ? -reach : 0); dk <= (dim_ > 2 ? reach : 0); ++dk)
    for (int dj = (dim_ > 1 ? -reach : 0); dj <= (dim_ > 1 ? reach : 0); ++dj)
      for (int di = -reach; di <= reach; ++di) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        const int nonzero = (di != 0) + (dj != 0) + (dk != 0);
        if (stencil_order == 1 && nonzero != 1) continue;
        if (std::gcd(std::gcd(std::abs(di), std::abs(dj)), std::abs(dk)) != 1) continue;
        const double len = h_ * std::sqrt(double(di * di + dj * dj + dk * dk));
        moves_.push_back({{di, dj, dk}, len});
      }
}

std::size_t GridMetricOracle::active_count() const {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), std::uint8_t{1}));
}

std::array<int, 3> GridMetricOracle::coords(std::size_t node) const {
  const auto nx = static_cast<std::size_t>(shape_[0]), ny = static_cast<std::size_t>(shape_[1]);
  return {static_cast<int>(node % nx), static_cast<int>((node / nx) % ny), static_cast<int>(node / (nx * ny))};
}

Point GridMetricOracle::position(std::size_t node) const {
  const auto c = coords(node);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = lower_[a] + c[a] * h_;
  return p;
}

std::size_t GridMetricOracle::snap(const Point& p) const {
  std::array<int, 3> base{0, 0, 0};
  for (int a = 0; a < dim_; ++a) base[a] = static_cast<int>(std::lround((p[a] - lower_[a]) / h_));
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d = std::numeric_limits<double>::infinity();
  for (int dk = (dim_ > 2 ? -2 : 0); dk <= (dim_ > 2 ? 2 : 0); ++dk)
    for (int dj = (dim_ > 1 ? -2 : 0); dj <= (dim_ > 1 ? 2 : 0); ++dj)
      for (int di = -2; di <= 2; ++di) {
        const int i = base[0] + di, j = base[1] + dj, k = base[2] + dk;
        if (i < 0 || j < 0 || k < 0 || i >= shape_[0] || j >= shape_[1] || k >= shape_[2]) continue;
        const std::size_t n = index(i, j, k);
        if (!active_[n]) continue;
        const double d = wgdiff::distance(position(n), p);
        if (d < best_d) {
          best_d = d;
          best = n;
        }
      }
  if (best == std::numeric_limits<std::size_t>::max()) throw ConfigError("grid oracle: point has no active node nearby");
  return best;
}

bool GridMetricOracle::edge_admissible(std::size_t a, std::size_t b) const {
  if (!active_[a] || !active_[b]) return false;
  if (domain_.kind() != DomainKind::VoxelMask) return true;  // boxes and balls are convex
  return segment_in_domain(position(a), position(b), domain_, 5);
}

std::vector<double> GridMetricOracle::dijkstra(std::size_t source, std::optional<std::size_t> target, double cutoff,
                                               bool unit_cost) const {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(cost_.size(), inf);
  std::vector<std::uint8_t> done(cost_.size(), 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, n] = heap.top();
    heap.pop();
    if (done[n]) continue;
    done[n] = 1;
    if (target && n == *target) break;
    if (d > cutoff) break;
    const auto c = coords(n);
    const double cn = unit_cost ? 1.0 : cost_[n];
    for (const auto& mv : moves_) {
      const int i = c[0] + mv.offset[0], j = c[1] + mv.offset[1], k = c[2] + mv.offset[2];
      if (i < 0 || j < 0 || k < 0 || i >= shape_[0] || j >= shape_[1] || k >= shape_[2]) continue;
      const std::size_t m = index(i, j, k);
      if (done[m] || !edge_admissible(n, m)) continue;
      const double cm = unit_cost ? 1.0 : cost_[m];
      const double nd = d + 0.5 * (cn + cm) * mv.length;
      if (nd < dist[m]) {
        dist[m] = nd;
        heap.emplace(nd, m);
      }
    }
  }
  return dist;
}

double GridMetricOracle::distance(const Point& x, const Point& y, bool unit_cost) const {
  const std::size_t s = snap(x), t = snap(y);
  const auto dist = dijkstra(s, t, std::numeric_limits<double>::infinity(), unit_cost);
  if (!std::isfinite(dist[t])) throw NumericalError("grid oracle: target unreachable inside the domain");
  return dist[t];
}

std::vector<double> GridMetricOracle::distances_from(const Point& source, double cutoff, bool unit_cost) const {
  return dijkstra(snap(source), std::nullopt, cutoff, unit_cost);
}

std::vector<double> GridMetricOracle::fast_marching_from(const Point& source) const {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> t(cost_.size(), inf);
  std::vector<std::uint8_t> known(cost_.size(), 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  const std::size_t s = snap(source);
  t[s] = 0.0;
  heap.emplace(0.0, s);

  const auto neighbour = [&](const std::array<int, 3>& c, int axis, int dir) -> std::optional<std::size_t> {
    auto w = c;
    w[axis] += dir;
    if (w[axis] < 0 || w[axis] >= shape_[axis]) return std::nullopt;
    const std::size_t m = index(w[0], w[1], w[2]);
    if (!active_[m]) return std::nullopt;
    return m;
  };

  while (!heap.empty()) {
    const auto [d, n] = heap.top();
    heap.pop();
    if (known[n] || d > t[n]) continue;
    known[n] = 1;
    const auto c = coords(n);
    for (int axis = 0; axis < dim_; ++axis) {
      for (int dir : {-1, 1}) {
        const auto m = neighbour(c, axis, dir);
        if (!m || known[*m]) continue;
        // Upwind update of node m from its known axis neighbours.
        const auto cm = coords(*m);
        double a[3];
        int count = 0;
        for (int ax = 0; ax < dim_; ++ax) {
          double best = inf;
          for (int dd : {-1, 1}) {
            const auto q = neighbour(cm, ax, dd);
            if (q && known[*q]) best = std::min(best, t[*q]);
          }
          if (std::isfinite(best)) a[count++] = best;
        }
        std::sort(a, a + count);
        const double f = cost_[*m] * h_;
        double candidate = a[0] + f;
        for (int used = 2; used <= count; ++used) {
          // Solve sum_{i<used} (T - a_i)^2 = f^2 for the larger root.
          double s1 = 0.0, s2 = 0.0;
          for (int i = 0; i < used; ++i) {
            s1 += a[i];
            s2 += a[i] * a[i];
          }
          const double disc = s1 * s1 - used * (s2 - f * f);
          if (disc < 0.0) break;
          const double root = (s1 + std::sqrt(disc)) / used;
          if (root < a[used - 1]) break;
          candidate = root;
        }
        if (candidate < t[*m]) {
          t[*m] = candidate;
          heap.emplace(candidate, *m);
        }
      }
    }
  }
  return t;
}

double GridMetricOracle::fast_marching_distance(const Point& x, const Point& y) const {
  const auto t = fast_marching_from(x);
  const double v = t[snap(y)];
  if (!std::isfinite(v)) throw NumericalError("fast marching: target unreachable inside the domain");
  return v;
}

// ---------------------------------------------------------------------------

StraightLineReport check_straight_line_bound(const Point& x, const Point& y, const ScalarField& g,
                                             const GridMetricOracle& oracle, const FieldBounds& bounds,
                                             double domain_constant_b) {
  StraightLineReport r;
  r.grid_distance = oracle.distance(x, y);
  r.unit_distance = oracle.distance(x, y, true);
  const double gx = g(x);
  const double euclid = distance(x, y);
  r.straight_value = gx * euclid;
  r.residual = std::abs(r.grid_distance - r.straight_value);
  r.grid_bias = gx * (r.unit_distance - euclid);
  r.corrected_residual = std::abs(r.grid_distance - gx * r.unit_distance);
  r.eps = r.grid_distance;

  // Sampled sup of |grad g| over the ball B(x, 4 lambda eps / g_lo).
  const double radius = 4.0 * bounds.lambda * r.eps / bounds.g_lo;
  const int dim = oracle.dim();
  constexpr int kPerAxis = 9;
  const double fd_step = 1e-6 * std::max(1.0, radius);
  double sup = 0.0;
  for (int k = 0; k < (dim > 2 ? kPerAxis : 1); ++k)
    for (int j = 0; j < (dim > 1 ? kPerAxis : 1); ++j)
      for (int i = 0; i < kPerAxis; ++i) {
        Point p = x;
        const int idx[3] = {i, j, k};
        for (int a = 0; a < dim; ++a) p[a] += radius * (2.0 * idx[a] / (kPerAxis - 1) - 1.0);
        if (distance(p, x) > radius) continue;
        const auto grad = gradient_fd(g, p, fd_step, dim).gradient;
        sup = std::max(sup, norm(grad));
      }
  r.sup_grad = sup;
  r.envelope = (r.eps * r.eps) / (bounds.g_lo * bounds.g_lo) *
               (6.0 * bounds.lambda * sup + domain_constant_b * bounds.g_hi);
  return r;
}

}  // namespace wgdiff

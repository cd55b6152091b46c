#include "wgdiff/energy.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "wgdiff/parallel.hpp"
#include "wgdiff/quadrature.hpp"

namespace wgdiff {

KernelMoment sigma_eta(const Kernel& kernel, int dim, double tolerance) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("sigma_eta: dimension must be 1, 2 or 3");
  const double prefactor = unit_sphere_area(dim) / dim;
  const auto radial = [&](double r) { return kernel.eta(r) * std::pow(r, dim + 1); };
  KernelMoment m;
  m.dim = dim;
  m.tolerance = tolerance;
  // Indicator and triangular are smooth on [0, 1); exp-square is smooth everywhere.
  m.sigma_eta = prefactor * integrate_adaptive(radial, 0.0, 1.0, tolerance / prefactor).value;
  m.full_space = kernel.compact()
                     ? m.sigma_eta
                     : m.sigma_eta + prefactor * integrate_adaptive(radial, 1.0, 12.0, tolerance / prefactor).value;
  return m;
}

double resolve_g_lo(const EnergyProblem& problem) {
  if (problem.g_lo > 0.0) return problem.g_lo;
  const auto bounds = estimate_bounds(problem.g, problem.domain, 4000);
  require_positive_connectivity(bounds);
  // Sampled minima overestimate the infimum; widen the support radius a little.
  return 0.9 * bounds.g_lo;
}

// ---------------------------------------------------------------------------
// Monte Carlo

EnergyEstimate nonlocal_energy_mc(const EnergyProblem& problem, double eps, std::size_t mc_pairs,
                                  std::uint64_t seed, const SegmentQuadrature& quadrature) {
  if (!(eps > 0.0)) throw ConfigError("nonlocal_energy: eps must be > 0");
  if (mc_pairs < 1000) throw ConfigError("nonlocal_energy: mc_pairs must be >= 1000");
  const int d = problem.domain.dim();
  const double g_lo = resolve_g_lo(problem);
  const double sigma = sigma_eta(problem.kernel, d).sigma_eta;
  const double radius = problem.kernel.support() * eps / g_lo;
  const double ball = unit_ball_volume(d) * std::pow(radius, d);
  const double scale = problem.domain.volume() * ball / (sigma * std::pow(eps, d + 2));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool convex = problem.domain.kind() != DomainKind::VoxelMask;
  std::vector<double> samples(mc_pairs), squares(mc_pairs);
  for (std::size_t s = 0; s < mc_pairs; ++s) {
    const Point x = problem.domain.sample_uniform(rng);
    // Uniform point in the ball: Gaussian direction, radius ~ R U^{1/d}.
    Point dir{0.0, 0.0, 0.0};
    double len = 0.0;
    do {
      for (int a = 0; a < d; ++a) dir[a] = normal(rng);
      len = norm(dir);
    } while (len == 0.0);
    const double r = radius * std::pow(unit(rng), 1.0 / d);
    Point y = x;
    for (int a = 0; a < d; ++a) y[a] += r * dir[a] / len;

    double value = 0.0;
    if (problem.domain.contains(y) && (convex || segment_in_domain(x, y, problem.domain, 32))) {
      const double dg = segment_weight(x, y, problem.g, quadrature);
      const double w = problem.kernel.eta(dg / eps);
      if (w > 0.0) {
        const double du = problem.u(x) - problem.u(y);
        value = scale * w * du * du * problem.rho(x) * problem.rho(y);
      }
    }
    samples[s] = value;
    squares[s] = value * value;
  }
  const double m = static_cast<double>(mc_pairs);
  const double mean = pairwise_sum(samples) / m;
  const double var = std::max(0.0, pairwise_sum(squares) / m - mean * mean) * m / (m - 1.0);
  return {mean, std::sqrt(var / m), mc_pairs};
}

// ---------------------------------------------------------------------------
// Deterministic quadrature, d = 1

namespace {

// Cumulative integral G(y) = int_lo^y g on a fine grid, evaluated between grid
// points by cubic Hermite interpolation (G' = g is known exactly).
class CumulativeIntegral {
 public:
  CumulativeIntegral(const ScalarField& g, double lo, double hi, int cells) : g_(g), lo_(lo), h_((hi - lo) / cells) {
    values_.resize(cells + 1);
    slopes_.resize(cells + 1);
    const auto& rule = gauss_legendre(6);
    values_[0] = 0.0;
    for (int c = 0; c <= cells; ++c) slopes_[c] = g(at(lo + c * h_));
    for (int c = 0; c < cells; ++c) {
      const double a = lo + c * h_, mid = a + 0.5 * h_;
      double acc = 0.0;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * g(at(mid + 0.5 * h_ * rule.nodes[k]));
      values_[c + 1] = values_[c] + 0.5 * h_ * acc;
    }
  }

  double operator()(double y) const {
    const int cells = static_cast<int>(values_.size()) - 1;
    int c = static_cast<int>(std::floor((y - lo_) / h_));
    c = std::clamp(c, 0, cells - 1);
    const double t = (y - (lo_ + c * h_)) / h_;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * values_[c] + (t3 - 2 * t2 + t) * h_ * slopes_[c] +
           (-2 * t3 + 3 * t2) * values_[c + 1] + (t3 - t2) * h_ * slopes_[c + 1];
  }

  /// Solves G(y) = target for y in [lo, hi].
  double inverse(double target) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), target);
    int c = static_cast<int>(it - values_.begin()) - 1;
    c = std::clamp(c, 0, static_cast<int>(values_.size()) - 2);
    double a = lo_ + c * h_, b = a + h_;
    double y = a + h_ * (target - values_[c]) / std::max(values_[c + 1] - values_[c], 1e-300);
    for (int iter = 0; iter < 60; ++iter) {
      const double f = (*this)(y) - target;
      if (f > 0) b = y; else a = y;
      const double step = f / g_(at(y));
      double next = y - step;
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - y) < 1e-15 * std::max(1.0, std::abs(y))) return next;
      y = next;
    }
    return y;
  }

  double lower() const { return lo_; }
  double upper() const { return lo_ + h_ * (static_cast<double>(values_.size()) - 1.0); }

 private:
  static Point at(double x) { return {x, 0.0, 0.0}; }

  const ScalarField& g_;
  double lo_, h_;
  std::vector<double> values_, slopes_;
};

double nonlocal_quadrature_1d(const EnergyProblem& problem, double eps, const NonlocalQuadratureOptions& opt) {
  const double lo = problem.domain.lower()[0], hi = problem.domain.upper()[0];
  const CumulativeIntegral G(problem.g, lo, hi, 20000);
  const double reach = problem.kernel.support() * eps;
  const double g_total = G(hi);
  const auto& inner_rule = gauss_legendre(opt.inner_order);
  const auto& outer_rule = gauss_legendre(opt.outer_order);
  const auto pt = [](double x) { return Point{x, 0.0, 0.0}; };

  const auto inner = [&](double x) {
    const double gx = G(x);
    const double ux = problem.u(pt(x));
    double total = 0.0;
    for (int side : {-1, 1}) {
      const double room = side > 0 ? g_total - gx : gx;
      const double smax = std::min(reach, room);
      if (smax <= 0.0) continue;
      // Substitute s = d_g(x, y): dy = ds / g(y).
      constexpr int kPanels = 2;
      const double width = smax / kPanels;
      for (int p = 0; p < kPanels; ++p) {
        const double mid = (p + 0.5) * width;
        for (std::size_t k = 0; k < inner_rule.nodes.size(); ++k) {
          const double s = mid + 0.5 * width * inner_rule.nodes[k];
          const double y = G.inverse(gx + side * s);
          const double du = ux - problem.u(pt(y));
          const double w = problem.kernel.eta(s / eps);
          total += 0.5 * width * inner_rule.weights[k] * w * du * du * problem.rho(pt(y)) / problem.g(pt(y));
        }
      }
    }
    return total * problem.rho(pt(x));
  };

  // Breakpoints where the support window starts touching the boundary.
  const double a = lo + opt.interior_margin, b = hi - opt.interior_margin;
  if (!(b > a)) throw ConfigError("nonlocal quadrature: interior margin swallows the domain");
  std::vector<double> breaks{a, b};
  if (reach < g_total) {
    breaks.push_back(G.inverse(reach));
    breaks.push_back(G.inverse(g_total - reach));
  }
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double l = std::max(breaks[s], a), r = std::min(breaks[s + 1], b);
    if (!(r > l)) continue;
    const int panels = std::max(2, static_cast<int>(std::ceil(opt.outer_panels * (r - l) / (b - a))));
    const double width = (r - l) / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = l + (p + 0.5) * width;
      for (std::size_t k = 0; k < outer_rule.nodes.size(); ++k)
        total += 0.5 * width * outer_rule.weights[k] * inner(mid + 0.5 * width * outer_rule.nodes[k]);
    }
  }
  const double sigma = sigma_eta(problem.kernel, 1).sigma_eta;
  return total / (sigma * std::pow(eps, 3));
}

// ---------------------------------------------------------------------------
// Deterministic quadrature, d = 2 (polar coordinates around each x)

double nonlocal_quadrature_2d(const EnergyProblem& problem, double eps, const NonlocalQuadratureOptions& opt) {
  const Point lo = problem.domain.lower(), hi = problem.domain.upper();
  const double reach = problem.kernel.support() * eps;
  const auto& inner_rule = gauss_legendre(opt.inner_order);
  const auto& outer_rule = gauss_legendre(opt.outer_order);
  const auto& seg_rule = gauss_legendre(8);
  const auto& piece_rule = gauss_legendre(4);
  const bool indicator = problem.kernel.profile() == KernelProfile::Indicator;

  // Line integral of g along x + t e for t in [a, b].
  const auto line = [&](const Point& x, const Point& e, double a, double b, const GaussRule& rule) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double t = mid + half * rule.nodes[k];
      acc += rule.weights[k] * problem.g({x[0] + t * e[0], x[1] + t * e[1], 0.0});
    }
    return half * acc;
  };

  const auto inner = [&](const Point& x) {
    const double ux = problem.u(x);
    double total = 0.0;
    for (int k = 0; k < opt.angles; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / opt.angles;
      const Point e{std::cos(theta), std::sin(theta), 0.0};
      double r_box = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 2; ++a) {
        if (e[a] > 1e-14) r_box = std::min(r_box, (hi[a] - x[a]) / e[a]);
        if (e[a] < -1e-14) r_box = std::min(r_box, (lo[a] - x[a]) / e[a]);
      }
      double r_end = r_box;
      if (line(x, e, 0.0, r_box, seg_rule) > reach) {
        // Newton for int_0^r g = reach; the integrand is positive so S is increasing.
        double r = std::min(r_box, reach / problem.g(x));
        double a = 0.0, b = r_box;
        for (int iter = 0; iter < 50; ++iter) {
          const double f = line(x, e, 0.0, r, seg_rule) - reach;
          if (f > 0) b = r; else a = r;
          double next = r - f / problem.g({x[0] + r * e[0], x[1] + r * e[1], 0.0});
          if (!(next > a && next < b)) next = 0.5 * (a + b);
          if (std::abs(next - r) < 1e-14) {
            r = next;
            break;
          }
          r = next;
        }
        r_end = r;
      }
      double ray = 0.0;
      double s_prev = 0.0, r_prev = 0.0;
      for (std::size_t q = 0; q < inner_rule.nodes.size(); ++q) {
        const double r = 0.5 * r_end * (1.0 + inner_rule.nodes[q]);
        const Point y{x[0] + r * e[0], x[1] + r * e[1], 0.0};
        double w = 1.0;
        if (!indicator) {
          s_prev += line(x, e, r_prev, r, piece_rule);
          r_prev = r;
          w = problem.kernel.eta(s_prev / eps);
        }
        const double du = ux - problem.u(y);
        ray += 0.5 * r_end * inner_rule.weights[q] * w * du * du * problem.rho(y) * r;
      }
      total += ray;
    }
    return total * (2.0 * std::numbers::pi / opt.angles) * problem.rho(x);
  };

  double total = 0.0;
  const double m = opt.interior_margin;
  const double ax = lo[0] + m, bx = hi[0] - m, ay = lo[1] + m, by = hi[1] - m;
  if (!(bx > ax && by > ay)) throw ConfigError("nonlocal quadrature: interior margin swallows the domain");
  const double wx = (bx - ax) / opt.outer_panels, wy = (by - ay) / opt.outer_panels;
  for (int pj = 0; pj < opt.outer_panels; ++pj)
    for (int pi = 0; pi < opt.outer_panels; ++pi)
      for (std::size_t kj = 0; kj < outer_rule.nodes.size(); ++kj)
        for (std::size_t ki = 0; ki < outer_rule.nodes.size(); ++ki) {
          const Point x{ax + (pi + 0.5) * wx + 0.5 * wx * outer_rule.nodes[ki],
                        ay + (pj + 0.5) * wy + 0.5 * wy * outer_rule.nodes[kj], 0.0};
          total += 0.25 * wx * wy * outer_rule.weights[ki] * outer_rule.weights[kj] * inner(x);
        }
  const double sigma = sigma_eta(problem.kernel, 2).sigma_eta;
  return total / (sigma * std::pow(eps, 4));
}

}  // namespace

double nonlocal_energy_quadrature(const EnergyProblem& problem, double eps, const NonlocalQuadratureOptions& options) {
  if (!(eps > 0.0)) throw ConfigError("nonlocal_energy: eps must be > 0");
  if (problem.domain.kind() != DomainKind::Box)
    throw ConfigError("nonlocal quadrature needs a box domain; use the Monte Carlo estimator");
  resolve_g_lo(problem);  // positivity gate
  switch (problem.domain.dim()) {
    case 1: return nonlocal_quadrature_1d(problem, eps, options);
    case 2: return nonlocal_quadrature_2d(problem, eps, options);
    default: throw ConfigError("nonlocal quadrature supports d = 1 and d = 2 only");
  }
}

// ---------------------------------------------------------------------------
// Local energy

LocalEnergyResult local_energy(const EnergyProblem& problem, const LocalEnergyOptions& options) {
  const Domain& dom = problem.domain;
  const int d = dom.dim();
  const auto bounds = estimate_bounds(problem.g, dom, 2000);
  require_positive_connectivity(bounds);
  Point lo = dom.lower(), hi = dom.upper();
  const bool is_box = dom.kind() == DomainKind::Box;
  if (is_box) {
    for (int a = 0; a < d; ++a) {
      lo[a] += options.interior_margin;
      hi[a] -= options.interior_margin;
      if (!(hi[a] > lo[a])) throw ConfigError("local_energy: interior margin swallows the domain");
    }
  }
  const double fd_step = 1e-5 * std::max(dom.diameter(), 1e-3);

  const auto evaluate = [&](int cells) {
    Point h{1.0, 1.0, 1.0};
    double vol = 1.0;
    for (int a = 0; a < d; ++a) {
      h[a] = (hi[a] - lo[a]) / cells;
      vol *= h[a];
    }
    const int ny = d > 1 ? cells : 1, nz = d > 2 ? cells : 1;
    std::vector<double> row;
    std::vector<double> partial;
    partial.reserve(static_cast<std::size_t>(ny) * nz);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j) {
        row.assign(static_cast<std::size_t>(cells), 0.0);
        for (int i = 0; i < cells; ++i) {
          Point x{lo[0] + (i + 0.5) * h[0], d > 1 ? lo[1] + (j + 0.5) * h[1] : 0.0,
                  d > 2 ? lo[2] + (k + 0.5) * h[2] : 0.0};
          if (!is_box) {
            if (!dom.contains(x)) continue;
            if (options.interior_margin > 0.0 && dom.distance_to_boundary(x) < options.interior_margin) continue;
          }
          const Point grad = gradient_fd(problem.u, x, fd_step, d).gradient;
          const double g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
          const double r = problem.rho(x);
          row[i] = r * r * g2 / std::pow(problem.g(x), d + 2);
        }
        partial.push_back(pairwise_sum(row));
      }
    return pairwise_sum(partial) * vol;
  };

  LocalEnergyResult result;
  int cells = options.initial_cells;
  double prev = evaluate(cells);
  for (int level = 1; level <= options.max_levels; ++level) {
    const int next_cells = cells * 2;
    if (std::pow(static_cast<double>(next_cells), d) > static_cast<double>(options.max_cells)) break;
    const double value = evaluate(next_cells);
    result.rel_change = std::abs(value - prev) / std::max(std::abs(value), 1e-300);
    cells = next_cells;
    prev = value;
    if (result.rel_change < options.rel_tol || value == 0.0) {
      result.converged = true;
      break;
    }
  }
  result.value = prev;
  result.cells_per_axis = cells;
  return result;
}

// ---------------------------------------------------------------------------
// Rate experiments

void write_rate_csv(std::ostream& out, const RateReport& report) {
  out.precision(17);
  out << "sweep_value,gap,stderr\n";
  for (std::size_t i = 0; i < report.sweep.size(); ++i)
    out << report.sweep[i] << ',' << report.gap[i] << ',' << report.std_error[i] << '\n';
  if (!out) throw IoError("rate csv: write failed");
}

namespace {

void fit_report(RateReport& report, bool drop_largest) {
  std::vector<double> xs, ys;
  std::size_t largest = 0;
  for (std::size_t i = 1; i < report.sweep.size(); ++i)
    if (report.sweep[i] > report.sweep[largest]) largest = i;
  for (std::size_t i = 0; i < report.sweep.size(); ++i) {
    if (drop_largest && i == largest) continue;
    if (!(report.gap[i] > 0.0)) continue;
    xs.push_back(report.sweep[i]);
    ys.push_back(report.gap[i]);
  }
  report.fit_points = xs.size();
  report.fit_valid = xs.size() >= 4;
  if (xs.size() >= 2) report.fit = fit_loglog(xs, ys);
}

}  // namespace

RateReport rate_experiment_discrete_vs_nonlocal(const DiscreteVsNonlocalConfig& config) {
  const auto& problem = config.problem;
  const int d = problem.domain.dim();
  const double g_lo = resolve_g_lo(problem);
  const bool quadrature_ok = problem.domain.kind() == DomainKind::Box && d <= 2;

  RateReport report;
  report.sweep_name = "n";
  for (std::size_t ni = 0; ni < config.n_values.size(); ++ni) {
    const std::size_t n = config.n_values[ni];
    const double eps = config.fixed_eps > 0.0 ? config.fixed_eps
                                              : eps_scaling(static_cast<double>(n), d, config.eps_scale, config.eps_rule);
    const double nonlocal = quadrature_ok
                                ? nonlocal_energy_quadrature(problem, eps, config.nonlocal_quadrature)
                                : nonlocal_energy_mc(problem, eps, config.mc_pairs, config.base_seed + 7919 * ni,
                                                     config.quadrature)
                                      .value;
    std::vector<double> gaps(static_cast<std::size_t>(config.seeds));
    parallel_for(gaps.size(), config.threads, [&](std::size_t s) {
      const std::uint64_t seed = config.base_seed + 100'003ULL * ni + s;
      const auto cloud = sample_points(problem.domain, problem.rho, n, seed);
      GraphOptions opts;
      opts.backend = MetricBackend::Segment;
      opts.quadrature = config.quadrature;
      opts.g_lo = g_lo;
      if (problem.domain.kind() == DomainKind::VoxelMask) opts.domain = &problem.domain;
      const auto graph = build_graph(cloud, eps, problem.kernel, problem.g, opts);
      std::vector<double> u(n);
      for (std::size_t i = 0; i < n; ++i) u[i] = problem.u(cloud.points[i]);
      gaps[s] = std::abs(dirichlet_energy(graph, u) - nonlocal);
    });
    report.sweep.push_back(static_cast<double>(n));
    report.gap.push_back(median(gaps));
    report.q25.push_back(quantile(gaps, 0.25));
    report.q75.push_back(quantile(gaps, 0.75));
    // Median standard error from the interquartile range (normal approximation).
    report.std_error.push_back(1.2533 * (report.q75.back() - report.q25.back()) / 1.349 /
                               std::sqrt(static_cast<double>(gaps.size())));
  }
  fit_report(report, false);
  return report;
}

StraightLineSweep straight_line_sweep(const StraightLineSweepConfig& config) {
  if (config.domain.dim() != 2) throw ConfigError("straight_line_sweep: needs a 2-D domain");
  if (config.distances.size() < 2) throw ConfigError("straight_line_sweep: needs at least two distances");
  if (config.origins.empty() || config.directions < 1) throw ConfigError("straight_line_sweep: needs origins and directions");
  const GridMetricOracle oracle(config.domain, config.g, config.h, config.stencil_order);
  const double r_max = *std::max_element(config.distances.begin(), config.distances.end());
  const auto bounds = estimate_bounds(config.g, config.domain, 4096);

  const std::size_t m = config.distances.size();
  std::vector<std::vector<double>> corrected(m), raw(m);
  StraightLineSweep out;
  for (const Point& origin : config.origins) {
    const std::size_t src = oracle.snap(origin);
    const Point x = oracle.position(src);
    const auto weighted = oracle.distances_from(x, 1.5 * r_max * bounds.g_hi + 10.0 * config.h * bounds.g_hi);
    const auto unit = oracle.distances_from(x, 1.5 * r_max + 10.0 * config.h, true);
    const double gx = config.g(x);
    for (int k = 0; k < config.directions; ++k) {
      // The 0.37 offset keeps every ray off the stencil directions.
      const double theta = 2.0 * std::numbers::pi * (k + 0.37) / config.directions;
      for (std::size_t i = 0; i < m; ++i) {
        const Point target{x[0] + config.distances[i] * std::cos(theta), x[1] + config.distances[i] * std::sin(theta), 0.0};
        if (!config.domain.contains(target)) continue;
        const std::size_t node = oracle.snap(target);
        if (!std::isfinite(weighted[node]) || !std::isfinite(unit[node])) continue;
        const Point y = oracle.position(node);
        corrected[i].push_back(std::abs(weighted[node] - gx * unit[node]));
        raw[i].push_back(std::abs(weighted[node] - gx * distance(x, y)));
        ++out.pairs;
      }
    }
  }
  auto summarize = [&](const std::vector<std::vector<double>>& values) {
    RateReport r;
    r.sweep_name = "distance";
    for (std::size_t i = 0; i < m; ++i) {
      if (values[i].empty()) continue;
      const auto n = static_cast<double>(values[i].size());
      const double mean = pairwise_sum(values[i]) / n;
      double ss = 0.0;
      for (double v : values[i]) ss += (v - mean) * (v - mean);
      r.sweep.push_back(config.distances[i]);
      r.gap.push_back(mean);
      r.std_error.push_back(n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0);
    }
    fit_report(r, false);
    return r;
  };
  out.corrected = summarize(corrected);
  out.raw = summarize(raw);
  return out;
}

RateReport rate_experiment_nonlocal_vs_local(const NonlocalVsLocalConfig& config) {
  const auto& problem = config.problem;
  const double g_lo = resolve_g_lo(problem);
  RateReport report;
  report.sweep_name = "eps";
  report.sweep = config.eps_values;
  report.gap.assign(config.eps_values.size(), 0.0);
  report.std_error.assign(config.eps_values.size(), 0.0);
  parallel_for(config.eps_values.size(), config.threads, [&](std::size_t i) {
    const double eps = config.eps_values[i];
    auto nq = config.nonlocal_quadrature;
    auto lo = config.local;
    if (config.exclude_boundary_band) {
      nq.interior_margin = problem.kernel.support() * eps / g_lo;
      lo.interior_margin = nq.interior_margin;
    }
    const double nonlocal = nonlocal_energy_quadrature(problem, eps, nq);
    const auto local = local_energy(problem, lo);
    report.gap[i] = std::abs(nonlocal - local.value);
    // Deterministic quadrature: report the local-energy refinement change as the error scale.
    report.std_error[i] = local.rel_change * std::abs(local.value);
  });
  fit_report(report, config.drop_largest);
  return report;
}

W11Report w11_limit_check(const ScalarField& g, const ScalarField& rho, const Domain& domain,
                          std::vector<double> eps_values, const W11Options& options) {
  const int d = domain.dim();
  const auto bounds = estimate_bounds(g, domain, 2000);
  require_positive_connectivity(bounds);
  std::sort(eps_values.begin(), eps_values.end(), std::greater<>());

  const int n = options.cells_per_axis;
  const Point lo = domain.lower(), hi = domain.upper();
  Point h{1.0, 1.0, 1.0};
  double vol = 1.0;
  for (int a = 0; a < d; ++a) {
    h[a] = (hi[a] - lo[a]) / n;
    vol *= h[a];
  }
  const int ny = d > 1 ? n : 1, nz = d > 2 ? n : 1;
  std::vector<Point> centers;
  std::vector<std::array<int, 3>> ids;
  std::vector<double> grad_norm, weight;
  const double fd_step = 1e-6 * std::max(domain.diameter(), 1e-3);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < n; ++i) {
        const Point x{lo[0] + (i + 0.5) * h[0], d > 1 ? lo[1] + (j + 0.5) * h[1] : 0.0,
                      d > 2 ? lo[2] + (k + 0.5) * h[2] : 0.0};
        if (!domain.contains(x)) continue;
        centers.push_back(x);
        ids.push_back({i, j, k});
        grad_norm.push_back(norm(gradient_fd(g, x, fd_step, d).gradient));
        weight.push_back(rho(x) * vol);
      }
  std::vector<long> lookup(static_cast<std::size_t>(n) * ny * nz, -1);
  for (std::size_t c = 0; c < ids.size(); ++c)
    lookup[ids[c][0] + static_cast<std::size_t>(n) * (ids[c][1] + static_cast<std::size_t>(ny) * ids[c][2])] =
        static_cast<long>(c);

  W11Report report;
  std::vector<double> terms(centers.size());
  for (std::size_t c = 0; c < centers.size(); ++c) terms[c] = grad_norm[c] * weight[c];
  report.limit = pairwise_sum(terms);
  for (const double eps : eps_values) {
    const double radius = 4.0 * bounds.lambda * eps / bounds.g_lo;
    int reach[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) reach[a] = static_cast<int>(std::floor(radius / h[a]));
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double sup = grad_norm[c];
      for (int dk = -reach[2]; dk <= reach[2]; ++dk)
        for (int dj = -reach[1]; dj <= reach[1]; ++dj)
          for (int di = -reach[0]; di <= reach[0]; ++di) {
            const int i = ids[c][0] + di, j = ids[c][1] + dj, k = ids[c][2] + dk;
            if (i < 0 || j < 0 || k < 0 || i >= n || j >= ny || k >= nz) continue;
            const long other = lookup[i + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(ny) * k)];
            if (other < 0) continue;
            if (distance(centers[static_cast<std::size_t>(other)], centers[c]) > radius) continue;
            sup = std::max(sup, grad_norm[static_cast<std::size_t>(other)]);
          }
      terms[c] = sup * weight[c];
    }
    report.eps.push_back(eps);
    report.smoothed.push_back(pairwise_sum(terms));
  }
  report.monotone = true;
  for (std::size_t i = 1; i < report.smoothed.size(); ++i)
    if (report.smoothed[i] > report.smoothed[i - 1] * (1.0 + 1e-12)) report.monotone = false;
  if (!report.smoothed.empty()) {
    const double last = report.smoothed.back();
    report.final_gap = report.limit > 0.0 ? (last - report.limit) / report.limit : std::abs(last - report.limit);
  }
  return report;
}

}  // namespace wgdiff

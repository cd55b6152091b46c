#include "wgdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "wgdiff/binary_io.hpp"

namespace wgdiff {

CellGrid::CellGrid(VoxelMask m) : mask(std::move(m)) {
  const auto& shape = mask.shape();
  const auto& h = mask.spacing();
  const int d = mask.dim();
  cell_of_voxel.assign(mask.size(), -1);
  for (int k = 0; k < shape[2]; ++k)
    for (int j = 0; j < shape[1]; ++j)
      for (int i = 0; i < shape[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        cell_of_voxel[mask.index(i, j, k)] = static_cast<long>(voxel.size());
        voxel.push_back(mask.index(i, j, k));
        center.push_back(mask.center(i, j, k));
        double area = 0.0;
        for (int a = 0; a < d; ++a) {
          double face = 1.0;
          for (int b = 0; b < d; ++b)
            if (b != a) face *= h[b];
          for (int s : {-1, 1}) {
            std::array<int, 3> q{i, j, k};
            q[a] += s;
            if (!mask.occupied(q[0], q[1], q[2])) area += face;
          }
        }
        boundary_area.push_back(area);
      }
  if (voxel.empty()) throw ConfigError("cell grid: mask has no occupied voxels");
}

std::vector<double> sample_cells(const CellGrid& grid, const ScalarField& f) {
  std::vector<double> out(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) out[c] = f(grid.center[c]);
  return out;
}

std::vector<double> diffusivity_from_g(const CellGrid& grid, const ScalarField& g) {
  const int d = grid.mask.dim();
  std::vector<double> out(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double v = g(grid.center[c]);
    if (!(v > 0.0)) throw ConfigError("diffusivity_from_g: g must be > 0 at every cell");
    out[c] = std::pow(v, -(d + 2));
  }
  return out;
}

void validate(const CellGrid& grid, const DiffusionProblem& p) {
  if (p.diffusivity.size() != grid.size() || p.u0.size() != grid.size())
    throw ConfigError("diffusion: one diffusivity and one initial value per cell required");
  for (const double v : p.diffusivity)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("diffusion: diffusivity must be finite and >= 0");
  for (const double v : p.u0)
    if (!std::isfinite(v)) throw ConfigError("diffusion: initial values must be finite");
  if (!(p.reaction >= 0.0)) throw ConfigError("diffusion: reaction rate must be >= 0");
  if (!(p.dt > 0.0) || !(p.horizon > 0.0)) throw ConfigError("diffusion: dt and T must be > 0");
}

// ---------------------------------------------------------------------------
// Operator

FvOperator::FvOperator(const CellGrid& grid, std::span<const double> D) {
  if (D.size() != grid.size()) throw ConfigError("FvOperator: one diffusivity per cell required");
  if (!grid.mask.is_connected()) throw ConfigError("FvOperator: mask cells are not face-connected");
  const auto& mask = grid.mask;
  const auto& h = mask.spacing();
  const auto& shape = mask.shape();
  const int d = mask.dim();
  const std::size_t n = grid.size();
  offset_.assign(1, 0);
  diag_.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t v = grid.voxel[c];
    const std::array<int, 3> idx{static_cast<int>(v % shape[0]), static_cast<int>((v / shape[0]) % shape[1]),
                                 static_cast<int>(v / (static_cast<std::size_t>(shape[0]) * shape[1]))};
    for (int a = 0; a < d; ++a)
      for (int s : {-1, 1}) {
        std::array<int, 3> q = idx;
        q[a] += s;
        if (!mask.occupied(q[0], q[1], q[2])) continue;  // zero-flux face
        const auto other = static_cast<std::size_t>(grid.cell_of_voxel[mask.index(q[0], q[1], q[2])]);
        const double sum = D[c] + D[other];
        const double face = sum > 0.0 ? 2.0 * D[c] * D[other] / sum : 0.0;
        const double coef = face / (h[a] * h[a]);
        col_.push_back(other);
        coef_.push_back(coef);
        diag_[c] += coef;
      }
    offset_.push_back(col_.size());
  }
}

void FvOperator::apply(std::span<const double> u, std::span<double> out) const {
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    double acc = diag_[i] * u[i];
    for (std::size_t e = offset_[i]; e < offset_[i + 1]; ++e) acc -= coef_[e] * u[col_[e]];
    out[i] = acc;
  }
}

// ---------------------------------------------------------------------------
// Solver

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) t[i] = a[i] * b[i];
  return pairwise_sum(t);
}

}  // namespace

CgResult solve_shifted(const FvOperator& op, double dt, std::span<const double> b, std::span<double> x,
                       const CgOptions& options) {
  const std::size_t n = op.size();
  std::vector<double> r(n), z(n), p(n), q(n), inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / (1.0 + dt * op.diagonal(i));
  const auto shifted = [&](std::span<const double> v, std::span<double> out) {
    op.apply(v, out);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] + dt * out[i];
  };
  shifted(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  const double b_norm = std::sqrt(dot(b, b));
  CgResult result;
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return result;
  }
  double r_norm = std::sqrt(dot(r, r));
  result.rel_residual = r_norm / b_norm;
  if (result.rel_residual <= options.rel_tol) return result;
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    shifted(p, q);
    const double alpha = rz / dot(p, q);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    r_norm = std::sqrt(dot(r, r));
    result.iterations = it;
    result.rel_residual = r_norm / b_norm;
    if (!std::isfinite(r_norm)) throw NumericalError("conjugate gradients: residual is not finite");
    if (result.rel_residual <= options.rel_tol) return result;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalError("conjugate gradients: no convergence within the iteration cap");
}

CgResult diffusion_step(const FvOperator& op, const DiffusionProblem& problem, std::span<const double> u,
                        std::span<double> u_next, const CgOptions& options) {
  const std::size_t n = op.size();
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = u[i] + problem.dt * problem.reaction * u[i] * (1.0 - u[i]);
  std::copy(u.begin(), u.end(), u_next.begin());
  return solve_shifted(op, problem.dt, rhs, u_next, options);
}

// ---------------------------------------------------------------------------
// Time loop

SolveTrace run_diffusion(const CellGrid& grid, const DiffusionProblem& problem, const RunOptions& options) {
  validate(grid, problem);
  const FvOperator op(grid, problem.diffusivity);
  const auto steps = static_cast<std::size_t>(std::llround(problem.horizon / problem.dt));
  if (steps == 0) throw ConfigError("diffusion: T must be at least one time step");
  for (const double t : options.snapshot_times)
    if (!(t >= 0.0 && t <= problem.horizon + 0.5 * problem.dt))
      throw ConfigError("diffusion: snapshot times must lie in [0, T]");

  std::vector<std::size_t> snap_steps;
  for (const double t : options.snapshot_times)
    snap_steps.push_back(static_cast<std::size_t>(std::llround(t / problem.dt)));

  const double vol = grid.cell_volume();
  SolveTrace trace;
  std::vector<double> terms(grid.size());
  const auto record = [&](std::size_t step, const std::vector<double>& u) {
    trace.time.push_back(static_cast<double>(step) * problem.dt);
    trace.mass.push_back(pairwise_sum(u) * vol);
    const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
    trace.min.push_back(*lo);
    trace.max.push_back(*hi);
    for (std::size_t c = 0; c < u.size(); ++c) terms[c] = grid.boundary_area[c] * u[c];
    trace.boundary_integral.push_back(pairwise_sum(terms));
    for (std::size_t s = 0; s < snap_steps.size(); ++s)
      if (snap_steps[s] == step) trace.snapshots.push_back({trace.time.back(), u});
  };

  std::vector<double> u = problem.u0, next(u.size());
  record(0, u);
  for (std::size_t step = 1; step <= steps; ++step) {
    const auto cg = diffusion_step(op, problem, u, next, options.cg);
    trace.cg_iterations += cg.iterations;
    if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); }))
      throw SolveAborted("diffusion: state is not finite", static_cast<double>(step - 1) * problem.dt, u);
    u.swap(next);
    record(step, u);
  }
  trace.final_state = std::move(u);
  return trace;
}

void write_trace_csv(std::ostream& out, const SolveTrace& trace) {
  out.precision(17);
  out << "t,mass,min,max,boundary_integral\n";
  for (std::size_t k = 0; k < trace.time.size(); ++k)
    out << trace.time[k] << ',' << trace.mass[k] << ',' << trace.min[k] << ',' << trace.max[k] << ','
        << trace.boundary_integral[k] << '\n';
  if (!out) throw IoError("trace csv: write failed");
}

void write_snapshot(std::ostream& out, const CellGrid& grid, const Snapshot& snapshot) {
  if (snapshot.values.size() != grid.size()) throw ConfigError("snapshot: one value per cell required");
  write_voxel_mask(out, grid.mask);
  binio::put_f64(out, snapshot.time);
  binio::put_u64(out, snapshot.values.size());
  for (const double v : snapshot.values) binio::put_f64(out, v);
  if (!out) throw IoError("snapshot: write failed");
}

Snapshot read_snapshot(std::istream& in, CellGrid* grid) {
  CellGrid g(read_voxel_mask(in));
  Snapshot s;
  s.time = binio::get_f64(in, "snapshot");
  const auto count = binio::get_u64(in, "snapshot");
  if (count != g.size()) throw IoError("snapshot: cell count does not match the mask");
  s.values.resize(count);
  for (auto& v : s.values) v = binio::get_f64(in, "snapshot");
  if (grid) *grid = std::move(g);
  return s;
}

// ---------------------------------------------------------------------------
// Boundary comparison

BoundaryGapReport boundary_gap_experiment(const CellGrid& grid, const ScalarField& g, double reaction,
                                          const ScalarField& u0, double dt, double horizon, const CgOptions& cg) {
  DiffusionProblem het;
  het.diffusivity = diffusivity_from_g(grid, g);
  het.reaction = reaction;
  het.u0 = sample_cells(grid, u0);
  het.dt = dt;
  het.horizon = horizon;
  DiffusionProblem flat = het;
  const double d_bar = *std::min_element(het.diffusivity.begin(), het.diffusivity.end());
  std::fill(flat.diffusivity.begin(), flat.diffusivity.end(), d_bar);

  RunOptions opts;
  opts.cg = cg;
  const auto a = run_diffusion(grid, het, opts);
  const auto b = run_diffusion(grid, flat, opts);

  BoundaryGapReport report;
  report.d_bar = d_bar;
  report.time = a.time;
  report.gap.resize(a.time.size());
  for (std::size_t k = 0; k < a.time.size(); ++k) {
    report.gap[k] = b.boundary_integral[k] - a.boundary_integral[k];
    if (std::abs(report.gap[k]) > std::abs(report.peak)) {
      report.peak = report.gap[k];
      report.peak_step = k;
      report.peak_time = a.time[k];
    }
  }
  return report;
}

void write_gap_csv(std::ostream& out, const BoundaryGapReport& report) {
  out.precision(17);
  out << "t,gap\n";
  for (std::size_t k = 0; k < report.time.size(); ++k) out << report.time[k] << ',' << report.gap[k] << '\n';
  if (!out) throw IoError("gap csv: write failed");
}

}  // namespace wgdiff

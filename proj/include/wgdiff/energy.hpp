#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wgdiff/core.hpp"
#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"
#include "wgdiff/graph.hpp"
#include "wgdiff/metric.hpp"

namespace wgdiff {

struct KernelMoment {
  double sigma_eta = 0.0;  ///< integral over the unit ball of eta(|w|) w_1^2
  int dim = 1;
  double tolerance = 1e-9;
  /// Same integral over all of R^d. Differs from sigma_eta only for profiles
  /// that do not vanish on [1, inf).
  double full_space = 0.0;
};

/// Radial reduction: int_{B_1} eta(|w|) w_1^2 dw = (S_{d-1} / d) int_0^1 eta(r) r^{d+1} dr,
/// evaluated by adaptive Gauss-Kronrod quadrature.
KernelMoment sigma_eta(const Kernel& kernel, int dim, double tolerance = 1e-9);

/// Inputs shared by the continuum energies.
struct EnergyProblem {
  Domain domain;
  ScalarField rho = ScalarField::constant(1.0);
  ScalarField g = ScalarField::constant(1.0);
  ScalarField u = ScalarField::constant(0.0);
  Kernel kernel{KernelProfile::Indicator};
  /// Lower bound of g for support radii; estimated (and gated) when <= 0.
  double g_lo = 0.0;
};

/// g_lo from the problem or a dense-sample estimate; throws on g_lo <= 0.
double resolve_g_lo(const EnergyProblem& problem);

struct EnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of I_eps[u]. x is uniform on the domain, y uniform in
/// B(x, support * eps / g_lo); d_g uses the segment quadrature. Pairs whose
/// segment leaves the domain contribute zero. Needs mc_pairs >= 1000.
EnergyEstimate nonlocal_energy_mc(const EnergyProblem& problem, double eps, std::size_t mc_pairs,
                                  std::uint64_t seed, const SegmentQuadrature& quadrature = {});

struct NonlocalQuadratureOptions {
  int outer_panels = 64;   ///< per axis
  int outer_order = 4;     ///< Gauss points per panel and axis
  int inner_order = 12;    ///< Gauss points along each ray / side
  int angles = 96;         ///< rays per point (d = 2)
  /// Outer x-integration is restricted to points at least this far from the
  /// box boundary (boundary-band exclusion).
  double interior_margin = 0.0;
};

/// Deterministic tensor-grid quadrature of I_eps[u] on box domains, d in {1, 2}.
/// In d = 1 the distance is the exact line integral of g; in d = 2 it is the
/// straight-segment integral (accurate Gauss quadrature along each ray).
double nonlocal_energy_quadrature(const EnergyProblem& problem, double eps,
                                  const NonlocalQuadratureOptions& options = {});

struct LocalEnergyOptions {
  double rel_tol = 1e-6;
  int initial_cells = 16;  ///< per axis
  int max_levels = 12;
  std::size_t max_cells = 40'000'000;
  double interior_margin = 0.0;  ///< box domains only
};

struct LocalEnergyResult {
  double value = 0.0;
  double rel_change = 0.0;  ///< between the last two refinement levels
  int cells_per_axis = 0;
  bool converged = false;
};

/// I[u] = int rho^2 |grad u|^2 / g^{d+2} by midpoint quadrature on nested
/// grids over the bounding box (cells whose center lies in the domain),
/// refined until successive values differ by less than rel_tol.
LocalEnergyResult local_energy(const EnergyProblem& problem, const LocalEnergyOptions& options = {});

/// Sweep summary for the convergence-rate experiments.
struct RateReport {
  std::string sweep_name;  ///< "eps" or "n"
  std::vector<double> sweep;
  std::vector<double> gap;        ///< per sweep point (median for repeated seeds)
  std::vector<double> std_error;  ///< per sweep point
  std::vector<double> q25, q75;   ///< only for repeated-seed sweeps
  LinearFit fit;                  ///< log(gap) vs log(sweep)
  bool fit_valid = false;
  std::size_t fit_points = 0;
};

/// CSV `sweep_value,gap,stderr`.
void write_rate_csv(std::ostream& out, const RateReport& report);

struct DiscreteVsNonlocalConfig {
  EnergyProblem problem;
  std::vector<std::size_t> n_values{};
  EpsRule eps_rule = EpsRule::PerDPlus2;
  double eps_scale = 1.0;
  /// When > 0, eps is held at this value for every n.
  double fixed_eps = 0.0;
  int seeds = 20;
  std::uint64_t base_seed = 1;
  SegmentQuadrature quadrature{};
  NonlocalQuadratureOptions nonlocal_quadrature{};
  /// Used for I_eps when the domain is not a box of dimension <= 2.
  std::size_t mc_pairs = 200'000;
  int threads = 1;
};

/// Gap |E_n[u] - I_eps[u]| over repeated seeds per n. gap holds the median,
/// q25/q75 the quartiles; fit is the log-log slope of the median against n.
RateReport rate_experiment_discrete_vs_nonlocal(const DiscreteVsNonlocalConfig& config);

struct NonlocalVsLocalConfig {
  EnergyProblem problem;
  std::vector<double> eps_values{};  ///< >= 5, geometric
  NonlocalQuadratureOptions nonlocal_quadrature{};
  LocalEnergyOptions local{};
  /// Exclude the boundary band of width eps / g_lo from both energies.
  bool exclude_boundary_band = false;
  bool drop_largest = false;
  int threads = 1;
};

/// |I_eps[u] - I[u]| over an eps sweep with a log-log slope fit.
RateReport rate_experiment_nonlocal_vs_local(const NonlocalVsLocalConfig& config);

struct StraightLineSweepConfig {
  Domain domain = Domain::unit_box(2);
  ScalarField g = ScalarField::constant(1.0);
  double h = 1e-3;
  int stencil_order = 3;
  std::vector<Point> origins;  ///< snapped to lattice nodes
  int directions = 8;          ///< equally spaced angles, offset from the lattice axes
  std::vector<double> distances;
};

struct StraightLineSweep {
  RateReport corrected;  ///< mean |d_grid - g(x) d_unit| per distance
  RateReport raw;        ///< mean |d_grid - g(x) |x - y|| per distance
  std::size_t pairs = 0;
};

/// Residual of the straight-line surrogate g(x)|x - y| for the weighted
/// distance on a 2-D grid oracle, over a distance sweep. The corrected
/// residual removes the lattice's own geometric bias by comparing with the
/// unit-cost path on the same stencil.
StraightLineSweep straight_line_sweep(const StraightLineSweepConfig& config);

struct W11Report {
  std::vector<double> eps;
  std::vector<double> smoothed;  ///< int sup_{B(x, 4 lambda eps / g_lo)} |grad g| rho dx
  double limit = 0.0;            ///< int |grad g| rho dx
  bool monotone = false;
  double final_gap = 0.0;        ///< relative gap at the smallest eps
};

struct W11Options {
  /// Midpoint cells per axis. The sup over each ball is taken over the same
  /// cell centers, so the sampled sets are nested as eps decreases.
  int cells_per_axis = 64;
};

W11Report w11_limit_check(const ScalarField& g, const ScalarField& rho, const Domain& domain,
                          std::vector<double> eps_values, const W11Options& options = {});

}  // namespace wgdiff

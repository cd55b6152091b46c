#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wgdiff/core.hpp"
#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"

namespace wgdiff {

/// Occupied voxels of a mask, numbered in storage order.
struct CellGrid {
  VoxelMask mask;
  std::vector<std::size_t> voxel;           ///< cell -> voxel index
  std::vector<long> cell_of_voxel;          ///< voxel -> cell, -1 when empty
  std::vector<Point> center;
  /// Area of the faces a cell shares with the outside (zero-flux boundary);
  /// sum(boundary_area * u) approximates the surface integral of u.
  std::vector<double> boundary_area;

  explicit CellGrid(VoxelMask mask);
  std::size_t size() const { return voxel.size(); }
  double cell_volume() const { return mask.voxel_volume(); }
};

/// Reaction-diffusion u_t - div(D grad u) = C u (1 - u) with zero-flux walls.
struct DiffusionProblem {
  std::vector<double> diffusivity;  ///< per cell, >= 0
  double reaction = 0.0;            ///< C >= 0
  std::vector<double> u0;           ///< per cell
  double dt = 1e-3;
  double horizon = 1.0;             ///< T
};

/// D = 1 / g^{d+2} at every cell center. Throws ConfigError when g <= 0.
std::vector<double> diffusivity_from_g(const CellGrid& grid, const ScalarField& g);
std::vector<double> sample_cells(const CellGrid& grid, const ScalarField& f);

void validate(const CellGrid& grid, const DiffusionProblem& problem);

/// Symmetric finite-volume discretization A of -div(D grad .):
/// (A u)_i = sum_j c_ij (u_i - u_j) over face neighbours, with
/// c_ij = harmonic_mean(D_i, D_j) / h_axis^2. Faces on the boundary carry no flux.
class FvOperator {
 public:
  FvOperator(const CellGrid& grid, std::span<const double> diffusivity);

  std::size_t size() const { return diag_.size(); }
  void apply(std::span<const double> u, std::span<double> out) const;
  double diagonal(std::size_t i) const { return diag_[i]; }
  /// Off-diagonal entries of row i as (column, coefficient c_ij); A_ij = -c_ij.
  std::span<const std::size_t> neighbours(std::size_t i) const {
    return {col_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }
  std::span<const double> coefficients(std::size_t i) const {
    return {coef_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }

 private:
  std::vector<std::size_t> offset_, col_;
  std::vector<double> coef_, diag_;
};

struct CgOptions {
  /// Tighter than the 1e-10 requirement so mass drift stays far below 1e-8 over 1e3 steps.
  double rel_tol = 1e-12;
  std::size_t max_iterations = 20'000;
};

struct CgResult {
  std::size_t iterations = 0;
  double rel_residual = 0.0;
};

/// Solves (I + dt A) x = b by Jacobi-preconditioned conjugate gradients with
/// x as the initial guess. Throws NumericalError without convergence.
CgResult solve_shifted(const FvOperator& op, double dt, std::span<const double> b, std::span<double> x,
                       const CgOptions& options = {});

/// One semi-implicit step: (I + dt A) u_next = u + dt C u (1 - u).
CgResult diffusion_step(const FvOperator& op, const DiffusionProblem& problem, std::span<const double> u,
                        std::span<double> u_next, const CgOptions& options = {});

struct RunOptions {
  std::vector<double> snapshot_times;  ///< rounded to the nearest step
  CgOptions cg{};
};

struct Snapshot {
  double time = 0.0;
  std::vector<double> values;
};

struct SolveTrace {
  std::vector<double> time;  ///< step times including t = 0
  std::vector<double> mass;  ///< sum u * cell volume
  std::vector<double> min, max;
  std::vector<double> boundary_integral;
  std::vector<Snapshot> snapshots;
  std::vector<double> final_state;
  std::size_t cg_iterations = 0;  ///< total over all steps
};

/// Raised when the state stops being finite; holds the last finite state.
class SolveAborted : public NumericalError {
 public:
  SolveAborted(const std::string& what, double time, std::vector<double> last_good)
      : NumericalError(what), time(time), last_good(std::move(last_good)) {}
  double time;
  std::vector<double> last_good;
};

SolveTrace run_diffusion(const CellGrid& grid, const DiffusionProblem& problem, const RunOptions& options = {});

/// CSV `t,mass,min,max,boundary_integral`.
void write_trace_csv(std::ostream& out, const SolveTrace& trace);

/// Snapshot file: the voxel mask format, then float64 time, uint64 cell
/// count and one float64 per occupied voxel in storage order.
void write_snapshot(std::ostream& out, const CellGrid& grid, const Snapshot& snapshot);
Snapshot read_snapshot(std::istream& in, CellGrid* grid = nullptr);

struct BoundaryGapReport {
  double d_bar = 0.0;             ///< min over cells of D
  std::vector<double> time;
  std::vector<double> gap;        ///< boundary integral of u_{D_bar} - u_D
  double peak = 0.0;              ///< gap value of largest magnitude
  double peak_time = 0.0;
  std::size_t peak_step = 0;
};

/// Runs the problem twice, with D = 1 / g^{d+2} and with the constant
/// D_bar = min D, and compares their boundary integrals per step.
BoundaryGapReport boundary_gap_experiment(const CellGrid& grid, const ScalarField& g, double reaction,
                                          const ScalarField& u0, double dt, double horizon,
                                          const CgOptions& cg = {});

/// CSV `t,gap`.
void write_gap_csv(std::ostream& out, const BoundaryGapReport& report);

}  // namespace wgdiff

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wgdiff/core.hpp"
#include "wgdiff/fields.hpp"

namespace wgdiff {

/// Binary 0/1 occupancy grid. Voxel (i, j, k) covers
/// [origin + (i, j, k) * spacing, origin + (i + 1, j + 1, k + 1) * spacing).
/// Storage is row-major over [k][j][i], i.e. x varies fastest.
class VoxelMask {
 public:
  VoxelMask() = default;
  VoxelMask(int dim, std::array<int, 3> shape, Point spacing, Point origin,
            std::vector<std::uint8_t> data);

  int dim() const { return dim_; }
  const std::array<int, 3>& shape() const { return shape_; }
  const Point& spacing() const { return spacing_; }
  const Point& origin() const { return origin_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  std::size_t size() const { return data_.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(shape_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(k));
  }
  bool in_grid(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < shape_[0] && j < shape_[1] && k < shape_[2];
  }
  bool occupied(int i, int j, int k) const { return in_grid(i, j, k) && data_[index(i, j, k)] != 0; }
  std::array<int, 3> voxel_of(const Point& p) const;
  Point center(int i, int j, int k) const;
  std::size_t count() const;
  double voxel_volume() const;

  /// True when the occupied voxels form one face-connected component.
  bool is_connected() const;

 private:
  int dim_ = 1;
  std::array<int, 3> shape_{1, 1, 1};
  Point spacing_{1.0, 1.0, 1.0};
  Point origin_{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> data_;
};

/// Ellipsoid centered in the grid; a ball when all semi-axes agree.
VoxelMask make_ellipsoid_mask(int dim, std::array<int, 3> shape, Point spacing, Point semi_axes);
/// Union of two overlapping balls along the x axis, joined by a narrow waist.
VoxelMask make_two_ball_mask(int dim, int cells_per_unit, double radius, double separation);
/// Unit square with its upper-right quadrant [0.5,1]^2 removed.
VoxelMask make_l_shape_mask(int cells_per_side);

void write_voxel_mask(std::ostream& out, const VoxelMask& mask);
VoxelMask read_voxel_mask(std::istream& in);
void write_voxel_mask_file(const std::string& path, const VoxelMask& mask);
VoxelMask read_voxel_mask_file(const std::string& path);

enum class DomainKind { Box, Ball, VoxelMask };

std::string to_string(DomainKind kind);

/// Closed bounded region with membership, boundary distance and sampling.
class Domain {
 public:
  static Domain box(int dim, Point lo, Point hi);
  static Domain unit_box(int dim);
  static Domain ball(int dim, Point center, double radius);
  /// Throws ConfigError on an empty or disconnected mask.
  static Domain voxel_mask(VoxelMask mask);

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool contains(const Point& p) const;
  /// Distance to the boundary for interior points, 0 outside. Analytic for
  /// boxes and balls; distance transform on the mask grid for voxel domains.
  double distance_to_boundary(const Point& p) const;
  const Point& lower() const { return lo_; }
  const Point& upper() const { return hi_; }
  double volume() const;
  double diameter() const;

  /// Uniform sample by rejection from the bounding box.
  Point sample_uniform(std::mt19937_64& rng) const;

  const VoxelMask* mask() const { return mask_.get(); }
  const Point& ball_center() const { return center_; }
  double ball_radius() const { return radius_; }

 private:
  Domain() = default;

  DomainKind kind_ = DomainKind::Box;
  int dim_ = 1;
  Point lo_{0.0, 0.0, 0.0};
  Point hi_{0.0, 0.0, 0.0};
  Point center_{0.0, 0.0, 0.0};
  double radius_ = 0.0;
  std::shared_ptr<const VoxelMask> mask_;
  std::shared_ptr<const std::vector<double>> boundary_distance_;  // per voxel
};

struct PointCloud {
  int dim = 1;
  std::vector<Point> points;
  std::vector<double> density;  ///< rho at each point; empty means rho = 1
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

struct NormalizationStats {
  Point mu{0.0, 0.0, 0.0};
  Point sd{1.0, 1.0, 1.0};  ///< per-axis standard deviation (population)

  Point apply(const Point& raw) const;
  Point invert(const Point& normalized) const;
};

struct SamplingOptions {
  /// Upper bound on rho used by the rejection test. Estimated from a dense
  /// sample (times a 1.25 safety factor) when absent.
  std::optional<double> rho_max;
  /// Abort threshold on the acceptance rate.
  double min_acceptance = 1e-4;
};

/// n i.i.d. points from rho restricted to the domain. Deterministic per seed.
PointCloud sample_points(const Domain& domain, const ScalarField& rho, std::size_t n,
                         std::uint64_t seed, const SamplingOptions& options = {});

/// Standard-score normalization: per-axis mean 0 and standard deviation 1.
std::pair<PointCloud, NormalizationStats> normalize(const PointCloud& cloud);
PointCloud denormalize(const PointCloud& cloud, const NormalizationStats& stats);

using RegionPredicate = std::function<bool(const Point&)>;

/// Points of the domain closer than `width` to its boundary.
RegionPredicate boundary_band(const Domain& domain, double width);

}  // namespace wgdiff

#include "wgdiff/geometry.hpp"

#include "wgdiff/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace wgdiff {

// ---------------------------------------------------------------------------
// VoxelMask

VoxelMask::VoxelMask(int dim, std::array<int, 3> shape, Point spacing, Point origin,
                     std::vector<std::uint8_t> data)
    : dim_(dim), shape_(shape), spacing_(spacing), origin_(origin), data_(std::move(data)) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("voxel mask: dimension must be 1, 2 or 3");
  for (int a = 0; a < 3; ++a) {
    if (shape_[a] < 1) throw ConfigError("voxel mask: shape entries must be >= 1");
    if (a >= dim && shape_[a] != 1) throw ConfigError("voxel mask: unused axes must have extent 1");
    if (a < dim && !(spacing_[a] > 0.0)) throw ConfigError("voxel mask: spacing must be > 0");
  }
  if (data_.size() != static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2])
    throw ConfigError("voxel mask: data size does not match shape");
  for (auto& v : data_) v = v != 0 ? 1 : 0;
}

std::array<int, 3> VoxelMask::voxel_of(const Point& p) const {
  std::array<int, 3> v{0, 0, 0};
  for (int a = 0; a < dim_; ++a) v[a] = static_cast<int>(std::floor((p[a] - origin_[a]) / spacing_[a]));
  return v;
}

Point VoxelMask::center(int i, int j, int k) const {
  Point c{0.0, 0.0, 0.0};
  const int idx[3] = {i, j, k};
  for (int a = 0; a < dim_; ++a) c[a] = origin_[a] + (idx[a] + 0.5) * spacing_[a];
  return c;
}

std::size_t VoxelMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

double VoxelMask::voxel_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= spacing_[a];
  return v;
}

bool VoxelMask::is_connected() const {
  const std::size_t total = count();
  if (total == 0) return false;
  std::vector<std::uint8_t> seen(data_.size(), 0);
  std::vector<std::array<int, 3>> stack;
  for (int k = 0; k < shape_[2] && stack.empty(); ++k)
    for (int j = 0; j < shape_[1] && stack.empty(); ++j)
      for (int i = 0; i < shape_[0] && stack.empty(); ++i)
        if (occupied(i, j, k)) {
          stack.push_back({i, j, k});
          seen[index(i, j, k)] = 1;
        }
  std::size_t reached = 0;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    ++reached;
    for (int a = 0; a < dim_; ++a) {
      for (int s : {-1, 1}) {
        auto w = v;
        w[a] += s;
        if (!occupied(w[0], w[1], w[2])) continue;
        auto& flag = seen[index(w[0], w[1], w[2])];
        if (flag) continue;
        flag = 1;
        stack.push_back(w);
      }
    }
  }
  return reached == total;
}

VoxelMask make_ellipsoid_mask(int dim, std::array<int, 3> shape, Point spacing, Point semi_axes) {
  for (int a = dim; a < 3; ++a) shape[a] = 1;
  Point origin{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) origin[a] = -0.5 * shape[a] * spacing[a];
  std::vector<std::uint8_t> data(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2], 0);
  VoxelMask probe(dim, shape, spacing, origin, data);
  for (int k = 0; k < shape[2]; ++k)
    for (int j = 0; j < shape[1]; ++j)
      for (int i = 0; i < shape[0]; ++i) {
        const Point c = probe.center(i, j, k);
        double r2 = 0.0;
        for (int a = 0; a < dim; ++a) r2 += (c[a] / semi_axes[a]) * (c[a] / semi_axes[a]);
        data[probe.index(i, j, k)] = r2 <= 1.0 ? 1 : 0;
      }
  return VoxelMask(dim, shape, spacing, origin, std::move(data));
}

VoxelMask make_two_ball_mask(int dim, int cells_per_unit, double radius, double separation) {
  const double h = 1.0 / cells_per_unit;
  const double half_x = 0.5 * separation + radius + 2.0 * h;
  const double half_other = radius + 2.0 * h;
  std::array<int, 3> shape{1, 1, 1};
  Point spacing{h, h, h};
  Point origin{0.0, 0.0, 0.0};
  shape[0] = static_cast<int>(std::ceil(2.0 * half_x / h));
  origin[0] = -0.5 * shape[0] * h;
  for (int a = 1; a < dim; ++a) {
    shape[a] = static_cast<int>(std::ceil(2.0 * half_other / h));
    origin[a] = -0.5 * shape[a] * h;
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2], 0);
  VoxelMask probe(dim, shape, spacing, origin, data);
  const Point c1{-0.5 * separation, 0.0, 0.0}, c2{0.5 * separation, 0.0, 0.0};
  for (int k = 0; k < shape[2]; ++k)
    for (int j = 0; j < shape[1]; ++j)
      for (int i = 0; i < shape[0]; ++i) {
        const Point c = probe.center(i, j, k);
        data[probe.index(i, j, k)] = (distance(c, c1) <= radius || distance(c, c2) <= radius) ? 1 : 0;
      }
  return VoxelMask(dim, shape, spacing, origin, std::move(data));
}

VoxelMask make_l_shape_mask(int cells_per_side) {
  const double h = 1.0 / cells_per_side;
  std::array<int, 3> shape{cells_per_side, cells_per_side, 1};
  std::vector<std::uint8_t> data(static_cast<std::size_t>(cells_per_side) * cells_per_side, 0);
  VoxelMask probe(2, shape, {h, h, 1.0}, {0.0, 0.0, 0.0}, data);
  for (int j = 0; j < cells_per_side; ++j)
    for (int i = 0; i < cells_per_side; ++i) {
      const Point c = probe.center(i, j, 0);
      data[probe.index(i, j, 0)] = (c[0] >= 0.5 && c[1] >= 0.5) ? 0 : 1;
    }
  return VoxelMask(2, shape, {h, h, 1.0}, {0.0, 0.0, 0.0}, std::move(data));
}

// ---------------------------------------------------------------------------
// Binary mask format (all integers and floats little-endian):
//   char[8]   magic "WGDMASK1"
//   uint32    dim
//   uint32[3] shape (nx, ny, nz)
//   float64[3] spacing
//   float64[3] origin
//   uint8[nx*ny*nz] occupancy, x fastest

namespace {

constexpr char kMaskMagic[8] = {'W', 'G', 'D', 'M', 'A', 'S', 'K', '1'};

}  // namespace

using namespace binio;

void write_voxel_mask(std::ostream& out, const VoxelMask& mask) {
  out.write(kMaskMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(mask.dim()));
  for (int a = 0; a < 3; ++a) put_u32(out, static_cast<std::uint32_t>(mask.shape()[a]));
  for (int a = 0; a < 3; ++a) put_f64(out, mask.spacing()[a]);
  for (int a = 0; a < 3; ++a) put_f64(out, mask.origin()[a]);
  out.write(reinterpret_cast<const char*>(mask.data().data()), static_cast<std::streamsize>(mask.size()));
  if (!out) throw IoError("voxel mask: write failed");
}

VoxelMask read_voxel_mask(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMaskMagic, 8) != 0) throw IoError("voxel mask: bad magic");
  const int dim = static_cast<int>(get_u32(in, "voxel mask"));
  std::array<int, 3> shape{};
  for (int a = 0; a < 3; ++a) shape[a] = static_cast<int>(get_u32(in, "voxel mask"));
  Point spacing{}, origin{};
  for (int a = 0; a < 3; ++a) spacing[a] = get_f64(in, "voxel mask");
  for (int a = 0; a < 3; ++a) origin[a] = get_f64(in, "voxel mask");
  const std::size_t n = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  if (n == 0 || n > (std::size_t{1} << 32)) throw IoError("voxel mask: implausible shape");
  std::vector<std::uint8_t> data(n);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n)))
    throw IoError("voxel mask: truncated payload");
  return VoxelMask(dim, shape, spacing, origin, std::move(data));
}

void write_voxel_mask_file(const std::string& path, const VoxelMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_voxel_mask(out, mask);
}

VoxelMask read_voxel_mask_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_voxel_mask(in);
}

// ---------------------------------------------------------------------------
// Distance transform

namespace {

// 1-D squared Euclidean distance transform of f (0 at features, inf elsewhere)
// with sample spacing h, lower-envelope algorithm of Felzenszwalb & Huttenlocher.
void edt_1d(std::vector<double>& f, double h) {
  const int n = static_cast<int>(f.size());
  std::vector<double> d(n), z(n + 1);
  std::vector<int> v(n);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  const auto pos = [h](int q) { return q * h; };
  for (int q = 1; q < n; ++q) {
    if (std::isinf(f[q])) continue;
    if (std::isinf(f[v[k]])) {
      v[k] = q;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (std::isinf(f[v[0]])) return;  // no features on this line
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < pos(q)) ++k;
    const double dq = pos(q) - pos(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
  f = std::move(d);
}

std::vector<double> mask_boundary_distance(const VoxelMask& mask) {
  // Pad by one voxel so the grid border counts as outside.
  const int dim = mask.dim();
  std::array<int, 3> ps{1, 1, 1};
  for (int a = 0; a < dim; ++a) ps[a] = mask.shape()[a] + 2;
  const auto pidx = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(ps[0]) * (j + static_cast<std::size_t>(ps[1]) * k);
  };
  const int off = 1;
  std::vector<double> f(static_cast<std::size_t>(ps[0]) * ps[1] * ps[2], 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ps[2]; ++k)
    for (int j = 0; j < ps[1]; ++j)
      for (int i = 0; i < ps[0]; ++i) {
        const int mi = i - off, mj = dim > 1 ? j - off : 0, mk = dim > 2 ? k - off : 0;
        f[pidx(i, j, k)] = mask.occupied(mi, mj, mk) ? inf : 0.0;
      }
  std::vector<double> line;
  for (int a = 0; a < dim; ++a) {
    const int n = ps[a];
    line.resize(n);
    const int o1 = (a + 1) % 3, o2 = (a + 2) % 3;
    for (int s = 0; s < ps[o2]; ++s)
      for (int r = 0; r < ps[o1]; ++r) {
        int idx[3];
        idx[o1] = r;
        idx[o2] = s;
        for (int q = 0; q < n; ++q) {
          idx[a] = q;
          line[q] = f[pidx(idx[0], idx[1], idx[2])];
        }
        edt_1d(line, mask.spacing()[a]);
        for (int q = 0; q < n; ++q) {
          idx[a] = q;
          f[pidx(idx[0], idx[1], idx[2])] = line[q];
        }
      }
  }
  double hmin = inf;
  for (int a = 0; a < dim; ++a) hmin = std::min(hmin, mask.spacing()[a]);
  std::vector<double> out(mask.size(), 0.0);
  for (int k = 0; k < mask.shape()[2]; ++k)
    for (int j = 0; j < mask.shape()[1]; ++j)
      for (int i = 0; i < mask.shape()[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        const double d2 = f[pidx(i + off, dim > 1 ? j + off : 0, dim > 2 ? k + off : 0)];
        // Nearest outside voxel center is one half-voxel beyond the boundary face.
        out[mask.index(i, j, k)] = std::max(0.0, std::sqrt(d2) - 0.5 * hmin);
      }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::Box: return "box";
    case DomainKind::Ball: return "ball";
    case DomainKind::VoxelMask: return "voxel-mask";
  }
  return "box";
}

Domain Domain::box(int dim, Point lo, Point hi) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("box: dimension must be 1, 2 or 3");
  Domain d;
  d.kind_ = DomainKind::Box;
  d.dim_ = dim;
  for (int a = 0; a < 3; ++a) {
    if (a >= dim) {
      lo[a] = hi[a] = 0.0;
    } else if (!(hi[a] > lo[a])) {
      throw ConfigError("box: upper corner must exceed lower corner on every axis");
    }
  }
  d.lo_ = lo;
  d.hi_ = hi;
  return d;
}

Domain Domain::unit_box(int dim) {
  Point hi{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) hi[a] = 1.0;
  return box(dim, {0.0, 0.0, 0.0}, hi);
}

Domain Domain::ball(int dim, Point center, double radius) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("ball: dimension must be 1, 2 or 3");
  if (!(radius > 0.0)) throw ConfigError("ball: radius must be > 0");
  Domain d;
  d.kind_ = DomainKind::Ball;
  d.dim_ = dim;
  for (int a = dim; a < 3; ++a) center[a] = 0.0;
  d.center_ = center;
  d.radius_ = radius;
  for (int a = 0; a < dim; ++a) {
    d.lo_[a] = center[a] - radius;
    d.hi_[a] = center[a] + radius;
  }
  return d;
}

Domain Domain::voxel_mask(VoxelMask mask) {
  if (mask.count() == 0) throw ConfigError("voxel mask domain is empty");
  if (!mask.is_connected()) throw ConfigError("voxel mask domain is not connected");
  Domain d;
  d.kind_ = DomainKind::VoxelMask;
  d.dim_ = mask.dim();
  // Tight bounding box of the occupied voxels.
  Point lo{0.0, 0.0, 0.0}, hi{0.0, 0.0, 0.0};
  for (int a = 0; a < d.dim_; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -std::numeric_limits<double>::infinity();
  }
  for (int k = 0; k < mask.shape()[2]; ++k)
    for (int j = 0; j < mask.shape()[1]; ++j)
      for (int i = 0; i < mask.shape()[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        const Point c = mask.center(i, j, k);
        for (int a = 0; a < d.dim_; ++a) {
          lo[a] = std::min(lo[a], c[a] - 0.5 * mask.spacing()[a]);
          hi[a] = std::max(hi[a], c[a] + 0.5 * mask.spacing()[a]);
        }
      }
  d.lo_ = lo;
  d.hi_ = hi;
  d.boundary_distance_ = std::make_shared<const std::vector<double>>(mask_boundary_distance(mask));
  d.mask_ = std::make_shared<const VoxelMask>(std::move(mask));
  return d;
}

bool Domain::contains(const Point& p) const {
  switch (kind_) {
    case DomainKind::Box:
      for (int a = 0; a < dim_; ++a)
        if (p[a] < lo_[a] || p[a] > hi_[a]) return false;
      return true;
    case DomainKind::Ball: {
      double r2 = 0.0;
      for (int a = 0; a < dim_; ++a) r2 += (p[a] - center_[a]) * (p[a] - center_[a]);
      return r2 <= radius_ * radius_;
    }
    case DomainKind::VoxelMask: {
      const auto v = mask_->voxel_of(p);
      return mask_->occupied(v[0], v[1], v[2]);
    }
  }
  return false;
}

double Domain::distance_to_boundary(const Point& p) const {
  if (!contains(p)) return 0.0;
  switch (kind_) {
    case DomainKind::Box: {
      double d = std::numeric_limits<double>::infinity();
      for (int a = 0; a < dim_; ++a) d = std::min({d, p[a] - lo_[a], hi_[a] - p[a]});
      return d;
    }
    case DomainKind::Ball: {
      double r2 = 0.0;
      for (int a = 0; a < dim_; ++a) r2 += (p[a] - center_[a]) * (p[a] - center_[a]);
      return radius_ - std::sqrt(r2);
    }
    case DomainKind::VoxelMask: {
      const auto v = mask_->voxel_of(p);
      return (*boundary_distance_)[mask_->index(v[0], v[1], v[2])];
    }
  }
  return 0.0;
}

double Domain::volume() const {
  switch (kind_) {
    case DomainKind::Box: {
      double v = 1.0;
      for (int a = 0; a < dim_; ++a) v *= hi_[a] - lo_[a];
      return v;
    }
    case DomainKind::Ball: return unit_ball_volume(dim_) * std::pow(radius_, dim_);
    case DomainKind::VoxelMask: return static_cast<double>(mask_->count()) * mask_->voxel_volume();
  }
  return 0.0;
}

double Domain::diameter() const {
  if (kind_ == DomainKind::Ball) return 2.0 * radius_;
  return distance(lo_, hi_);
}

Point Domain::sample_uniform(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 10'000'000; ++attempt) {
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) p[a] = lo_[a] + unit(rng) * (hi_[a] - lo_[a]);
    if (contains(p)) return p;
  }
  throw NumericalError("domain sampling failed: bounding-box acceptance too low");
}

// ---------------------------------------------------------------------------
// Sampling and normalization

PointCloud sample_points(const Domain& domain, const ScalarField& rho, std::size_t n, std::uint64_t seed,
                         const SamplingOptions& options) {
  if (n < 2) throw ConfigError("sample_points: need n >= 2");
  double rho_max = 0.0;
  if (options.rho_max) {
    rho_max = *options.rho_max;
  } else {
    rho_max = 1.25 * estimate_bounds(rho, domain, 2000, seed ^ 0x9e3779b97f4a7c15ULL).g_hi;
  }
  if (!(rho_max > 0.0)) throw ConfigError("sample_points: density must be positive somewhere");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.dim = domain.dim();
  cloud.seed = seed;
  cloud.points.reserve(n);
  cloud.density.reserve(n);
  const Point& lo = domain.lower();
  const Point& hi = domain.upper();
  std::uint64_t proposals = 0;
  const auto check_every = static_cast<std::uint64_t>(100.0 / options.min_acceptance);
  while (cloud.points.size() < n) {
    ++proposals;
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < domain.dim(); ++a) p[a] = lo[a] + unit(rng) * (hi[a] - lo[a]);
    const double u = unit(rng);
    if (domain.contains(p)) {
      const double r = rho(p);
      if (r < 0.0) throw ConfigError("sample_points: density is negative inside the domain");
      if (u * rho_max < r) {
        cloud.points.push_back(p);
        cloud.density.push_back(r);
      }
    }
    if (proposals % check_every == 0 &&
        static_cast<double>(cloud.points.size()) < options.min_acceptance * static_cast<double>(proposals)) {
      throw NumericalError("sample_points: acceptance rate below " + std::to_string(options.min_acceptance) +
                           " after " + std::to_string(proposals) + " proposals");
    }
  }
  return cloud;
}

Point NormalizationStats::apply(const Point& raw) const {
  Point out{0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) out[a] = (raw[a] - mu[a]) / sd[a];
  return out;
}

Point NormalizationStats::invert(const Point& normalized) const {
  Point out{0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) out[a] = normalized[a] * sd[a] + mu[a];
  return out;
}

std::pair<PointCloud, NormalizationStats> normalize(const PointCloud& cloud) {
  if (cloud.size() < 2) throw ConfigError("normalize: need at least two points");
  NormalizationStats stats;
  const double n = static_cast<double>(cloud.size());
  for (int a = 0; a < cloud.dim; ++a) {
    std::vector<double> col(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) col[i] = cloud.points[i][a];
    const double mean = pairwise_sum(col) / n;
    for (auto& v : col) v = (v - mean) * (v - mean);
    const double sd = std::sqrt(pairwise_sum(col) / n);
    if (!(sd > 0.0)) throw ConfigError("normalize: zero variance along axis " + std::to_string(a));
    stats.mu[a] = mean;
    stats.sd[a] = sd;
  }
  PointCloud out = cloud;
  for (auto& p : out.points) p = stats.apply(p);
  return {std::move(out), stats};
}

PointCloud denormalize(const PointCloud& cloud, const NormalizationStats& stats) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = stats.invert(p);
  return out;
}

RegionPredicate boundary_band(const Domain& domain, double width) {
  if (!(width > 0.0)) throw ConfigError("boundary_band: width must be > 0");
  return [domain, width](const Point& p) { return domain.contains(p) && domain.distance_to_boundary(p) < width; };
}

}  // namespace wgdiff

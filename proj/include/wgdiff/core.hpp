#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgdiff {

/// Points live in R^d with d <= 3. Unused trailing components are zero, so
/// radial and Euclidean formulas work unchanged in every dimension.
using Point = std::array<double, 3>;

inline constexpr int kMaxDim = 3;

// Error classes. The CLI maps each to a distinct exit code.

/// Invalid input or configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: divergence, non-convergence, violated assumption (exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or serialization failure (exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double norm(const Point& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

inline double distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline Point lerp(const Point& a, const Point& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

/// Volume of the unit ball in R^d.
double unit_ball_volume(int dim);

/// Surface area of the unit sphere S^{d-1} in R^d.
double unit_sphere_area(int dim);

/// Pairwise (cascade) summation. The evaluation order depends only on the
/// length of the input, so results are reproducible run to run.
double pairwise_sum(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
};

/// Ordinary least squares of y on x. Needs at least two distinct x values.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log(y) against log(x). All values must be positive.
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

/// Empirical quantile with linear interpolation, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace wgdiff

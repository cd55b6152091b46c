#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "wgdiff/core.hpp"

namespace wgdiff {

class Domain;

enum class FieldKind { Constant, SigmoidRadial, CosineRadial, Affine, Sine, Gaussian, GridSampled, Learned, Custom };

std::string to_string(FieldKind kind);

/// g(x) = sigmoid(-a (|x| - b)) + c, bounded in (c, 1 + c).
struct SigmoidRadialParams {
  double a = 2.0;  ///< sharpness, > 0
  double b = 1.0;  ///< radial center
  double c = 0.5;  ///< offset, > 0
};

/// g(x) = A cos(pi - a (|x| - b)) + c; positive when c - A > 0.
struct CosineRadialParams {
  double amplitude = 0.2;
  double a = 2.0;
  double b = 1.0;
  double c = 0.8;
};

/// u(x) = <coeffs, x> + offset.
struct AffineParams {
  Point coeffs{1.0, 0.0, 0.0};
  double offset = 0.0;
};

/// u(x) = amplitude * sin(frequency * x[axis] + phase).
struct SineParams {
  int axis = 0;
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
};

/// u(x) = amplitude * exp(-|x - center|^2 / (2 width^2)) + offset.
struct GaussianParams {
  Point center{0.0, 0.0, 0.0};
  double amplitude = 1.0;
  double width = 0.25;  ///< > 0
  double offset = 0.0;
};

/// Node values on a regular grid, evaluated by multilinear interpolation.
/// Points outside the grid are clamped to the nearest grid cell.
struct GridSamples {
  int dim = 1;
  std::array<int, 3> shape{1, 1, 1};
  Point origin{0.0, 0.0, 0.0};
  Point spacing{1.0, 1.0, 1.0};
  std::vector<double> values;  ///< x-fastest, size shape[0]*shape[1]*shape[2]
};

using FieldParams = std::variant<std::monostate, double, SigmoidRadialParams, CosineRadialParams,
                                 AffineParams, SineParams, GaussianParams>;

/// Immutable scalar field over R^d. Copies share the evaluator, which must be
/// safe to call concurrently.
class ScalarField {
 public:
  using Evaluator = std::function<double(const Point&)>;

  static ScalarField constant(double value);
  static ScalarField sigmoid_radial(const SigmoidRadialParams& params);
  static ScalarField cosine_radial(const CosineRadialParams& params);
  static ScalarField affine(const AffineParams& params);
  static ScalarField sine(const SineParams& params);
  static ScalarField gaussian(const GaussianParams& params);
  static ScalarField grid_sampled(GridSamples samples);
  /// Wraps an arbitrary evaluator (learned models, test functions).
  static ScalarField custom(Evaluator evaluator, FieldKind kind = FieldKind::Custom);

  double operator()(const Point& p) const { return (*eval_)(p); }

  FieldKind kind() const { return kind_; }
  const FieldParams& params() const { return params_; }
  /// Non-null for grid-sampled fields.
  const GridSamples* grid() const { return grid_.get(); }

  /// Field multiplied pointwise by a constant factor.
  ScalarField scaled(double factor) const;

 private:
  ScalarField(FieldKind kind, FieldParams params, Evaluator eval);

  FieldKind kind_ = FieldKind::Custom;
  FieldParams params_;
  std::shared_ptr<const Evaluator> eval_;
  std::shared_ptr<const GridSamples> grid_;
};

double eval_sigmoid_radial(const Point& p, const SigmoidRadialParams& params);
double eval_cosine_radial(const Point& p, const CosineRadialParams& params);

void validate(const SigmoidRadialParams& params);
void validate(const CosineRadialParams& params);

struct GradientResult {
  Point gradient{0.0, 0.0, 0.0};
  /// Set when at least one axis used a one-sided stencil because the central
  /// stencil left the domain.
  bool one_sided = false;
};

/// Central-difference gradient over the first `dim` axes. When a domain is
/// given and p +/- h e_k leaves it, that axis falls back to a one-sided
/// difference.
GradientResult gradient_fd(const ScalarField& f, const Point& p, double h, int dim,
                           const Domain* domain = nullptr);

/// Sampled bounds of a connectivity field g, optionally with the regularity
/// of a test function u. Sampled extrema are inner approximations.
struct FieldBounds {
  double g_lo = 0.0;
  double g_hi = 0.0;
  double lambda = 0.0;  ///< g_hi / g_lo + 1
  double lip_g = 0.0;
  double lip_u = 0.0;
  double c11_u = 0.0;
};

/// Min/max over `samples` uniform domain points and the largest pairwise
/// slope among pairs closer than 0.1 * diam(domain).
FieldBounds estimate_bounds(const ScalarField& g, const Domain& domain, int samples,
                            std::uint64_t seed = 7);

/// Fills lip_u and c11_u for a test function u.
void attach_test_function_bounds(FieldBounds& bounds, const ScalarField& u, const Domain& domain,
                                 int samples, std::uint64_t seed = 11);

/// Throws ConfigError unless g_lo > 0 (positivity gate for connectivity fields).
void require_positive_connectivity(const FieldBounds& bounds);

}  // namespace wgdiff

#include "wgdiff/fields.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <random>

#include "wgdiff/geometry.hpp"

namespace wgdiff {

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::Constant: return "constant";
    case FieldKind::SigmoidRadial: return "sigmoid-radial";
    case FieldKind::CosineRadial: return "cosine-radial";
    case FieldKind::Affine: return "affine";
    case FieldKind::Sine: return "sine";
    case FieldKind::Gaussian: return "gaussian";
    case FieldKind::GridSampled: return "grid-sampled";
    case FieldKind::Learned: return "learned";
    case FieldKind::Custom: return "custom";
  }
  return "custom";
}

ScalarField::ScalarField(FieldKind kind, FieldParams params, Evaluator eval)
    : kind_(kind), params_(std::move(params)), eval_(std::make_shared<const Evaluator>(std::move(eval))) {}

ScalarField ScalarField::constant(double value) {
  return ScalarField(FieldKind::Constant, value, [value](const Point&) { return value; });
}

double eval_sigmoid_radial(const Point& p, const SigmoidRadialParams& params) {
  const double t = -params.a * (norm(p) - params.b);
  return 1.0 / (1.0 + std::exp(-t)) + params.c;
}

double eval_cosine_radial(const Point& p, const CosineRadialParams& params) {
  return params.amplitude * std::cos(std::numbers::pi - params.a * (norm(p) - params.b)) + params.c;
}

void validate(const SigmoidRadialParams& params) {
  if (!(params.a > 0.0)) throw ConfigError("sigmoid-radial: sharpness a must be > 0");
  if (!(params.c > 0.0)) throw ConfigError("sigmoid-radial: offset c must be > 0");
}

void validate(const CosineRadialParams& params) {
  if (!(params.amplitude > 0.0)) throw ConfigError("cosine-radial: amplitude must be > 0");
  if (!(params.a > 0.0)) throw ConfigError("cosine-radial: frequency a must be > 0");
  if (!(params.c - params.amplitude > 0.0)) throw ConfigError("cosine-radial: need c - A > 0");
}

ScalarField ScalarField::sigmoid_radial(const SigmoidRadialParams& params) {
  validate(params);
  return ScalarField(FieldKind::SigmoidRadial, params,
                     [params](const Point& p) { return eval_sigmoid_radial(p, params); });
}

ScalarField ScalarField::cosine_radial(const CosineRadialParams& params) {
  validate(params);
  return ScalarField(FieldKind::CosineRadial, params,
                     [params](const Point& p) { return eval_cosine_radial(p, params); });
}

ScalarField ScalarField::affine(const AffineParams& params) {
  return ScalarField(FieldKind::Affine, params, [params](const Point& p) {
    return params.coeffs[0] * p[0] + params.coeffs[1] * p[1] + params.coeffs[2] * p[2] + params.offset;
  });
}

ScalarField ScalarField::gaussian(const GaussianParams& params) {
  if (!(params.width > 0.0)) throw ConfigError("gaussian: width must be > 0");
  return ScalarField(FieldKind::Gaussian, params, [params](const Point& p) {
    const double r2 = distance(p, params.center) * distance(p, params.center);
    return params.amplitude * std::exp(-r2 / (2.0 * params.width * params.width)) + params.offset;
  });
}

ScalarField ScalarField::sine(const SineParams& params) {
  if (params.axis < 0 || params.axis >= kMaxDim) throw ConfigError("sine: axis out of range");
  return ScalarField(FieldKind::Sine, params, [params](const Point& p) {
    return params.amplitude * std::sin(params.frequency * p[params.axis] + params.phase);
  });
}

namespace {

double interpolate(const GridSamples& g, const Point& p) {
  // Multilinear interpolation with clamping to the grid extent.
  int base[3] = {0, 0, 0};
  double frac[3] = {0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    if (a >= g.dim || g.shape[a] == 1) continue;
    double s = (p[a] - g.origin[a]) / g.spacing[a];
    s = std::clamp(s, 0.0, static_cast<double>(g.shape[a] - 1));
    int i = std::min(static_cast<int>(std::floor(s)), g.shape[a] - 2);
    base[a] = i;
    frac[a] = s - i;
  }
  const auto at = [&](int i, int j, int k) {
    return g.values[static_cast<std::size_t>(i) +
                    static_cast<std::size_t>(g.shape[0]) *
                        (static_cast<std::size_t>(j) + static_cast<std::size_t>(g.shape[1]) * k)];
  };
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double wx = di ? frac[0] : 1.0 - frac[0];
    const double wy = dj ? frac[1] : 1.0 - frac[1];
    const double wz = dk ? frac[2] : 1.0 - frac[2];
    const double w = wx * wy * wz;
    if (w == 0.0) continue;
    acc += w * at(base[0] + di, base[1] + dj, base[2] + dk);
  }
  return acc;
}

}  // namespace

ScalarField ScalarField::grid_sampled(GridSamples samples) {
  if (samples.dim < 1 || samples.dim > kMaxDim) throw ConfigError("grid-sampled: bad dimension");
  const std::size_t expected = static_cast<std::size_t>(samples.shape[0]) * samples.shape[1] * samples.shape[2];
  if (samples.values.size() != expected || expected == 0)
    throw ConfigError("grid-sampled: value count does not match shape");
  auto grid = std::make_shared<const GridSamples>(std::move(samples));
  ScalarField f(FieldKind::GridSampled, std::monostate{},
                [grid](const Point& p) { return interpolate(*grid, p); });
  f.grid_ = grid;
  return f;
}

ScalarField ScalarField::custom(Evaluator evaluator, FieldKind kind) {
  return ScalarField(kind, std::monostate{}, std::move(evaluator));
}

ScalarField ScalarField::scaled(double factor) const {
  auto inner = eval_;
  return ScalarField(FieldKind::Custom, std::monostate{},
                     [inner, factor](const Point& p) { return factor * (*inner)(p); });
}

GradientResult gradient_fd(const ScalarField& f, const Point& p, double h, int dim, const Domain* domain) {
  GradientResult out;
  for (int k = 0; k < dim; ++k) {
    Point plus = p, minus = p;
    plus[k] += h;
    minus[k] -= h;
    const bool plus_ok = domain == nullptr || domain->contains(plus);
    const bool minus_ok = domain == nullptr || domain->contains(minus);
    if (plus_ok && minus_ok) {
      out.gradient[k] = (f(plus) - f(minus)) / (2.0 * h);
    } else if (plus_ok) {
      out.gradient[k] = (f(plus) - f(p)) / h;
      out.one_sided = true;
    } else if (minus_ok) {
      out.gradient[k] = (f(p) - f(minus)) / h;
      out.one_sided = true;
    } else {
      // Both neighbours outside (thin domain); fall back to the central value.
      out.gradient[k] = (f(plus) - f(minus)) / (2.0 * h);
      out.one_sided = true;
    }
  }
  return out;
}

namespace {

std::vector<Point> dense_sample(const Domain& domain, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("estimate_bounds: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) pts.push_back(domain.sample_uniform(rng));
  return pts;
}

// Largest |v_i - v_j| / |x_i - x_j| over pairs closer than `radius`.
double max_pair_slope(const std::vector<Point>& pts, const std::vector<double>& vals, double radius) {
  double lip = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double r = distance(pts[i], pts[j]);
      if (r <= 0.0 || r >= radius) continue;
      lip = std::max(lip, std::abs(vals[i] - vals[j]) / r);
    }
  }
  return lip;
}

}  // namespace

FieldBounds estimate_bounds(const ScalarField& g, const Domain& domain, int samples, std::uint64_t seed) {
  const auto pts = dense_sample(domain, samples, seed);
  std::vector<double> vals(pts.size());
  FieldBounds b;
  b.g_lo = std::numeric_limits<double>::infinity();
  b.g_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = g(pts[i]);
    b.g_lo = std::min(b.g_lo, vals[i]);
    b.g_hi = std::max(b.g_hi, vals[i]);
  }
  b.lambda = b.g_lo > 0.0 ? b.g_hi / b.g_lo + 1.0 : std::numeric_limits<double>::infinity();
  b.lip_g = max_pair_slope(pts, vals, 0.1 * domain.diameter());
  return b;
}

void attach_test_function_bounds(FieldBounds& bounds, const ScalarField& u, const Domain& domain, int samples,
                                 std::uint64_t seed) {
  const auto pts = dense_sample(domain, samples, seed);
  const double radius = 0.1 * domain.diameter();
  std::vector<double> vals(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = u(pts[i]);
  bounds.lip_u = max_pair_slope(pts, vals, radius);

  const double h = 1e-5 * std::max(domain.diameter(), 1e-3);
  std::vector<Point> grads(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) grads[i] = gradient_fd(u, pts[i], h, domain.dim()).gradient;
  double c11 = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double r = distance(pts[i], pts[j]);
      if (r <= 0.0 || r >= radius) continue;
      c11 = std::max(c11, distance(grads[i], grads[j]) / r);
    }
  }
  bounds.c11_u = c11;
}

void require_positive_connectivity(const FieldBounds& bounds) {
  if (!(bounds.g_lo > 0.0))
    throw ConfigError("connectivity field must be bounded below by a positive constant (sampled min = " +
                      std::to_string(bounds.g_lo) + ")");
}

}  // namespace wgdiff

#include "wgdiff/recovery.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "wgdiff/binary_io.hpp"
#include "wgdiff/parallel.hpp"

namespace wgdiff {

namespace {

constexpr int H = MlpField::kHidden;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Parameter block offsets for input dimension d.
struct Layout {
  explicit Layout(int d)
      : w1(0), b1(H * d), w2(b1 + H), b2(w2 + H * H), w3(b2 + H), b3(w3 + H), total(b3 + 1) {}
  std::size_t w1, b1, w2, b2, w3, b3, total;
};

// Activations of one forward pass, kept for the backward pass.
struct Activations {
  std::array<double, H> z1, z2, a1, a2, s1, s2;  // s = sigmoid(z)
  double z3 = 0.0;
};

double forward(const double* w, int d, const Layout& L, const Point& p, Activations& act) {
  for (int h = 0; h < H; ++h) {
    double z = w[L.b1 + h];
    for (int a = 0; a < d; ++a) z += w[L.w1 + h * d + a] * p[a];
    act.z1[h] = z;
    act.s1[h] = sigmoid(z);
    act.a1[h] = z * act.s1[h];
  }
  for (int h = 0; h < H; ++h) {
    double z = w[L.b2 + h];
    for (int k = 0; k < H; ++k) z += w[L.w2 + h * H + k] * act.a1[k];
    act.z2[h] = z;
    act.s2[h] = sigmoid(z);
    act.a2[h] = z * act.s2[h];
  }
  double z = w[L.b3];
  for (int k = 0; k < H; ++k) z += w[L.w3 + k] * act.a2[k];
  act.z3 = z;
  return softplus(z);
}

double silu_prime(double z, double s) { return s * (1.0 + z * (1.0 - s)); }

void backward(const double* w, int d, const Layout& L, const Point& p, const Activations& act, double upstream,
              double* grad) {
  const double dz3 = upstream * sigmoid(act.z3);
  grad[L.b3] += dz3;
  std::array<double, H> dz2;
  for (int k = 0; k < H; ++k) {
    grad[L.w3 + k] += dz3 * act.a2[k];
    dz2[k] = dz3 * w[L.w3 + k] * silu_prime(act.z2[k], act.s2[k]);
  }
  std::array<double, H> da1{};
  for (int h = 0; h < H; ++h) {
    grad[L.b2 + h] += dz2[h];
    for (int k = 0; k < H; ++k) {
      grad[L.w2 + h * H + k] += dz2[h] * act.a1[k];
      da1[k] += w[L.w2 + h * H + k] * dz2[h];
    }
  }
  for (int h = 0; h < H; ++h) {
    const double dz1 = da1[h] * silu_prime(act.z1[h], act.s1[h]);
    grad[L.b1 + h] += dz1;
    for (int a = 0; a < d; ++a) grad[L.w1 + h * d + a] += dz1 * p[a];
  }
}

}  // namespace

double silu(double x) { return x * sigmoid(x); }

double softplus(double x) {
  // ln(1 + e^x) without overflow for large x or cancellation for negative x.
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  // e^x underflows below about -745; keep the output strictly positive.
  return std::max(std::log1p(std::exp(x)), std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------
// MlpField

MlpField::MlpField(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("MlpField: dimension must be 1, 2 or 3");
  params_.assign(param_count(dim), 0.0);
}

MlpField MlpField::random(int dim, std::uint64_t seed) {
  MlpField m(dim);
  const Layout L(dim);
  std::mt19937_64 rng(seed);
  const auto fill = [&](std::size_t from, std::size_t to, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = from; k < to; ++k) m.params_[k] = u(rng);
  };
  fill(L.w1, L.w2, dim);  // W1 and b1
  fill(L.w2, L.w3, H);    // W2 and b2
  fill(L.w3, L.total, H); // W3 and b3
  return m;
}

double MlpField::operator()(const Point& p) const {
  Activations act;
  return forward(params_.data(), dim_, Layout(dim_), p, act);
}

double MlpField::forward_backward(const Point& p, double upstream, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ConfigError("MlpField: gradient size mismatch");
  const Layout L(dim_);
  Activations act;
  const double value = forward(params_.data(), dim_, L, p, act);
  backward(params_.data(), dim_, L, p, act, upstream, grad.data());
  return value;
}

ScalarField MlpField::as_field() const {
  auto snapshot = std::make_shared<const MlpField>(*this);
  return ScalarField::custom([snapshot](const Point& p) { return (*snapshot)(p); }, FieldKind::Learned);
}

namespace {
constexpr char kCheckpointMagic[8] = {'W', 'G', 'D', 'M', 'L', 'P', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const MlpField& model) {
  out.write(kCheckpointMagic, 8);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, 4);
  for (const int w : {model.dim(), H, H, 1}) binio::put_u32(out, static_cast<std::uint32_t>(w));
  binio::put_u64(out, model.size());
  for (const double v : model.params()) binio::put_f64(out, v);
  if (!out) throw IoError("checkpoint: write failed");
}

MlpField read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic))
    throw IoError("checkpoint: bad magic");
  if (binio::get_u32(in, "checkpoint") != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
  if (binio::get_u32(in, "checkpoint") != 4) throw IoError("checkpoint: unsupported architecture");
  std::array<std::uint32_t, 4> widths;
  for (auto& w : widths) w = binio::get_u32(in, "checkpoint");
  if (widths[0] < 1 || widths[0] > static_cast<std::uint32_t>(kMaxDim) || widths[1] != H || widths[2] != H ||
      widths[3] != 1)
    throw IoError("checkpoint: unsupported architecture");
  MlpField model(static_cast<int>(widths[0]));
  if (binio::get_u64(in, "checkpoint") != model.size()) throw IoError("checkpoint: parameter count mismatch");
  for (auto& v : model.params()) v = binio::get_f64(in, "checkpoint");
  return model;
}

// ---------------------------------------------------------------------------
// Data

PairDataset PairDataset::subset(std::span<const std::size_t> rows) const {
  PairDataset out;
  out.dim = dim;
  out.eps = eps;
  out.quadrature = quadrature;
  for (const auto r : rows) {
    out.i.push_back(i[r]);
    out.j.push_back(j[r]);
    out.xi.push_back(xi[r]);
    out.xj.push_back(xj[r]);
    out.weight.push_back(weight[r]);
    out.target.push_back(target[r]);
  }
  return out;
}

PairDataset synthesize_weights(const PointCloud& cloud, const ScalarField& g_true, double eps, const Kernel& kernel,
                               const SegmentQuadrature& quadrature, const PairFilter& filter) {
  if (!(eps > 0.0)) throw ConfigError("synthesize_weights: eps must be > 0");
  if (!kernel.invertible()) throw ConfigError("synthesize_weights: kernel must be invertible");
  PairDataset data;
  data.dim = cloud.dim;
  data.eps = eps;
  data.quadrature = quadrature;
  const std::size_t n = cloud.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const Point& x = cloud.points[a];
      const Point& y = cloud.points[b];
      if (!(distance(x, y) < eps)) continue;
      if (filter && !filter(x, y)) continue;
      const double t = segment_weight(x, y, g_true, quadrature);
      const double w = kernel.eta(t);
      if (!(w > 0.0) || !std::isfinite(t)) throw NumericalError("synthesize_weights: weight outside eta's invertible range");
      data.i.push_back(static_cast<std::uint32_t>(a));
      data.j.push_back(static_cast<std::uint32_t>(b));
      data.xi.push_back(x);
      data.xj.push_back(y);
      data.weight.push_back(w);
      data.target.push_back(kernel.eta_inv(w));
    }
  return data;
}

void write_dataset_csv(std::ostream& out, const PairDataset& data) {
  out.precision(17);
  out << "i,j";
  for (const char* side : {"xi", "xj"})
    for (int a = 0; a < data.dim; ++a) out << ',' << side << a;
  out << ",w_ij,eta_inv_target\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.i[r] << ',' << data.j[r];
    for (int a = 0; a < data.dim; ++a) out << ',' << data.xi[r][a];
    for (int a = 0; a < data.dim; ++a) out << ',' << data.xj[r][a];
    out << ',' << data.weight[r] << ',' << data.target[r] << '\n';
  }
  if (!out) throw IoError("dataset csv: write failed");
}

// ---------------------------------------------------------------------------
// Loss

double recovery_loss(const ScalarField& field, const PairDataset& data) {
  if (data.size() == 0) throw ConfigError("recovery_loss: empty dataset");
  std::vector<double> sq(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double res = segment_weight(data.xi[r], data.xj[r], field, data.quadrature) - data.target[r];
    sq[r] = res * res;
  }
  return pairwise_sum(sq) / static_cast<double>(data.size());
}

namespace {

// Batched evaluation over the quadrature nodes of a block of pairs. Columns
// are nodes; rows are hidden units.
using HMat = Eigen::Matrix<double, H, Eigen::Dynamic>;
using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using PMat = Eigen::Matrix<double, 3, Eigen::Dynamic>;  // unused coordinate rows are zero

constexpr std::size_t kBlock = 96;  // pairs per block; keeps the activations cache resident

}  // namespace

// Quadrature nodes of every pair laid out block by block, built once per dataset.
struct PreparedPairs {
  explicit PreparedPairs(const PairDataset& data) : source(&data), nodes(data.quadrature.steps + 1) {
    for (int k = 0; k < nodes; ++k) node_weight.push_back(data.quadrature.node_weight(k));
    for (std::size_t start = 0; start < data.size(); start += kBlock) {
      const std::size_t count = std::min(kBlock, data.size() - start);
      PMat P = PMat::Zero(3, static_cast<Eigen::Index>(count * nodes));
      for (std::size_t r = 0; r < count; ++r) {
        const Point& x = data.xi[start + r];
        const Point& y = data.xj[start + r];
        length.push_back(distance(x, y));
        for (int k = 0; k < nodes; ++k) {
          const Point q = lerp(x, y, static_cast<double>(k) / data.quadrature.steps);
          for (int a = 0; a < data.dim; ++a) P(a, static_cast<Eigen::Index>(r * nodes + k)) = q[a];
        }
      }
      blocks.push_back(std::move(P));
    }
  }
  const PairDataset* source;
  int nodes;
  std::vector<double> node_weight;
  std::vector<double> length;
  std::vector<PMat> blocks;
};

namespace {

template <typename Z>
HMat sigmoid_of(const Z& z) {
  // 1 / (1 + e^{-z}); e^{-z} overflows to +inf for very negative z, which still yields 0.
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

double loss_impl(const MlpField& model, const PreparedPairs& prep, std::vector<double>* grad) {
  const PairDataset& data = *prep.source;
  if (data.size() == 0) throw ConfigError("recovery_loss: empty dataset");
  if (data.dim != model.dim()) throw ConfigError("recovery_loss: dimension mismatch");
  const int d = model.dim();
  const Layout L(d);
  const double* w = model.params().data();
  const int nodes = prep.nodes;
  const double m = static_cast<double>(data.size());

  Eigen::Matrix<double, H, 3> W1 = Eigen::Matrix<double, H, 3>::Zero();
  for (int h = 0; h < H; ++h)
    for (int a = 0; a < d; ++a) W1(h, a) = w[L.w1 + h * d + a];
  const Eigen::Map<const Eigen::Matrix<double, H, 1>> b1(w + L.b1);
  const Eigen::Map<const Eigen::Matrix<double, H, H, Eigen::RowMajor>> W2(w + L.w2);
  const Eigen::Map<const Eigen::Matrix<double, H, 1>> b2(w + L.b2);
  const Eigen::Map<const Eigen::Matrix<double, 1, H>> W3(w + L.w3);
  const double b3 = w[L.b3];

  Eigen::Matrix<double, H, 3> gW1 = Eigen::Matrix<double, H, 3>::Zero();
  Eigen::Matrix<double, H, H> gW2 = Eigen::Matrix<double, H, H>::Zero();
  Eigen::Matrix<double, H, 1> gb1 = Eigen::Matrix<double, H, 1>::Zero(), gb2 = gb1;
  Eigen::Matrix<double, 1, H> gW3 = Eigen::Matrix<double, 1, H>::Zero();
  double gb3 = 0.0;

  std::vector<double> sq(data.size());
  HMat Z1, S1, A1, Z2, S2, A2, dZ1, dZ2;
  Row z3, out, upstream, dz3;
  for (std::size_t b = 0; b < prep.blocks.size(); ++b) {
    const PMat& P = prep.blocks[b];
    const std::size_t start = b * kBlock;
    const std::size_t count = static_cast<std::size_t>(P.cols()) / nodes;
    Z1.noalias() = W1.lazyProduct(P);
    Z1.colwise() += b1;
    S1 = sigmoid_of(Z1);
    A1 = Z1.cwiseProduct(S1);
    Z2.noalias() = W2.lazyProduct(A1);
    Z2.colwise() += b2;
    S2 = sigmoid_of(Z2);
    A2 = Z2.cwiseProduct(S2);
    z3.noalias() = W3 * A2;
    z3.array() += b3;
    // Softplus, stable form: max(z, 0) + log1p(e^{-|z|}). log1p(x) is taken as
    // log(1 + x) * x / ((1 + x) - 1), which vectorizes and keeps full precision.
    {
      const auto e = (-z3.array().abs()).exp().eval();
      const auto u = (1.0 + e).eval();
      out = (z3.array().max(0.0) + (u == 1.0).select(e, u.log() * e / (u - 1.0)))
                .max(std::numeric_limits<double>::min());
    }

    upstream.resize(P.cols());
    for (std::size_t r = 0; r < count; ++r) {
      const double len = prep.length[start + r];
      const auto base = static_cast<Eigen::Index>(r * nodes);
      double acc = 0.0;
      for (int k = 0; k < nodes; ++k) acc += prep.node_weight[k] * out(base + k);
      const double res = len * acc - data.target[start + r];
      sq[start + r] = res * res;
      const double scale = 2.0 * res * len / m;
      for (int k = 0; k < nodes; ++k) upstream(base + k) = scale * prep.node_weight[k];
    }
    if (!grad) continue;

    // d softplus / dz = sigmoid(z).
    dz3 = upstream.cwiseProduct(Row((1.0 + (-z3.array()).exp()).inverse()));
    gb3 += dz3.sum();
    gW3.noalias() += dz3 * A2.transpose();
    dZ2 = (W3.transpose() * dz3).cwiseProduct(S2.cwiseProduct(HMat(1.0 + Z2.array() * (1.0 - S2.array()))));
    gW2.noalias() += dZ2 * A1.transpose();
    gb2 += dZ2.rowwise().sum();
    dZ1 = (W2.transpose() * dZ2).cwiseProduct(S1.cwiseProduct(HMat(1.0 + Z1.array() * (1.0 - S1.array()))));
    gW1.noalias() += dZ1 * P.transpose();
    gb1 += dZ1.rowwise().sum();
  }

  if (grad) {
    grad->assign(model.size(), 0.0);
    auto& g = *grad;
    for (int h = 0; h < H; ++h) {
      for (int a = 0; a < d; ++a) g[L.w1 + h * d + a] = gW1(h, a);
      g[L.b1 + h] = gb1(h);
      for (int k = 0; k < H; ++k) g[L.w2 + h * H + k] = gW2(h, k);
      g[L.b2 + h] = gb2(h);
      g[L.w3 + h] = gW3(h);
    }
    g[L.b3] = gb3;
  }
  return pairwise_sum(sq) / m;
}

}  // namespace

double recovery_loss(const MlpField& model, const PairDataset& data) {
  return loss_impl(model, PreparedPairs(data), nullptr);
}

double recovery_loss_gradient(const MlpField& model, const PairDataset& data, std::vector<double>& grad) {
  return loss_impl(model, PreparedPairs(data), &grad);
}

// ---------------------------------------------------------------------------
// Training

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0))
    throw ConfigError("train: moment decay rates must lie in [0, 1)");
  if (!(c.adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
  if (!(c.loss_threshold > 0.0)) throw ConfigError("train: loss_threshold must be > 0");
  if (c.max_iterations == 0) throw ConfigError("train: max_iterations must be > 0");
  if (c.patience == 0) throw ConfigError("train: patience must be > 0");
  if (c.folds < 2) throw ConfigError("train: folds must be >= 2");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Threshold: return "threshold";
    case StopReason::Plateau: return "plateau";
    case StopReason::IterationCap: return "iteration-cap";
  }
  return "iteration-cap";
}

TrainResult train(const MlpField& initial, const PairDataset& data, const TrainConfig& config) {
  validate(config);
  TrainResult result;
  result.model = initial;
  MlpField model = initial;
  const std::size_t p = model.size();
  std::vector<double> grad, m1(p, 0.0), m2(p, 0.0);
  result.best_loss = std::numeric_limits<double>::infinity();
  double plateau_ref = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;
  double b1t = 1.0, b2t = 1.0;
  result.trace.reserve(std::min<std::size_t>(config.max_iterations, 1 << 16));

  if (data.size() == 0) throw ConfigError("train: empty dataset");
  const PreparedPairs prepared(data);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const double loss = loss_impl(model, prepared, &grad);
    if (!std::isfinite(loss)) throw TrainingDiverged("train: loss is not finite", std::move(result.trace));
    result.trace.push_back(loss);
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.best_iteration = it;
      result.model = model;
    }
    if (loss < plateau_ref - config.min_improvement) {
      plateau_ref = loss;
      last_improvement = it;
    }
    if (loss < config.loss_threshold) {
      result.reason = StopReason::Threshold;
      break;
    }
    if (it - last_improvement >= config.patience) {
      result.reason = StopReason::Plateau;
      break;
    }
    b1t *= config.beta1;
    b2t *= config.beta2;
    auto& w = model.params();
    for (std::size_t k = 0; k < p; ++k) {
      m1[k] = config.beta1 * m1[k] + (1.0 - config.beta1) * grad[k];
      m2[k] = config.beta2 * m2[k] + (1.0 - config.beta2) * grad[k] * grad[k];
      const double mhat = m1[k] / (1.0 - b1t);
      const double vhat = m2[k] / (1.0 - b2t);
      w[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
  result.iterations = result.trace.size();
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

RecoveryMetrics evaluate_recovery(const ScalarField& model, const ScalarField& g_true,
                                  std::span<const Point> test_points, int dim) {
  if (test_points.empty()) throw ConfigError("evaluate_recovery: no test points");
  const std::size_t n = test_points.size();
  std::vector<double> abs_g(n), sq_g(n), abs_d(n), sq_d(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double gt = g_true(test_points[k]);
    const double gm = model(test_points[k]);
    if (!(gt > 0.0)) throw NumericalError("evaluate_recovery: g_true <= 0 at a test point");
    const double e = gt - gm;
    abs_g[k] = std::abs(e);
    sq_g[k] = e * e;
    // (D_true - D_model) / D_true with D = g^{-(d+2)}.
    const double rel = 1.0 - std::pow(gt / gm, dim + 2);
    abs_d[k] = std::abs(rel);
    sq_d[k] = rel * rel;
  }
  const double dn = static_cast<double>(n);
  RecoveryMetrics out;
  out.mae = pairwise_sum(abs_g) / dn;
  out.rmse = std::sqrt(pairwise_sum(sq_g) / dn);
  out.rmae = pairwise_sum(abs_d) / dn;
  out.rrmse = std::sqrt(pairwise_sum(sq_d) / dn);
  return out;
}

LogStats aggregate_log_stats(std::span<const double> values) {
  if (values.empty()) throw ConfigError("aggregate_log_stats: no values");
  std::vector<double> logs(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0)) throw ConfigError("aggregate_log_stats: values must be > 0");
    logs[k] = std::log(values[k]);
  }
  const double n = static_cast<double>(logs.size());
  const double mean = pairwise_sum(logs) / n;
  for (auto& l : logs) l = (l - mean) * (l - mean);
  return {std::exp(mean), std::exp(std::sqrt(pairwise_sum(logs) / n))};
}

std::vector<FoldResult> kfold_cv(const PairDataset& data, const TrainConfig& config, int k) {
  if (k < 2) throw ConfigError("kfold_cv: k must be >= 2");
  if (data.size() < static_cast<std::size_t>(k)) throw ConfigError("kfold_cv: fewer pairs than folds");
  std::vector<std::size_t> order(data.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
  // Fisher-Yates with raw engine output: identical across standard libraries.
  std::mt19937_64 rng(config.seed);
  for (std::size_t r = order.size() - 1; r > 0; --r) std::swap(order[r], order[rng() % (r + 1)]);

  std::vector<FoldResult> out(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t r = 0; r < order.size(); ++r) (static_cast<int>(r % k) == f ? va : tr).push_back(order[r]);
    if (va.empty()) throw ConfigError("kfold_cv: empty validation fold");
    const auto train_set = data.subset(tr);
    const auto val_set = data.subset(va);
    TrainConfig fold_config = config;
    fold_config.seed = config.seed + static_cast<std::uint64_t>(f);
    const auto fit = train(MlpField::random(data.dim, fold_config.seed), train_set, fold_config);
    out[f] = {fit.best_loss, recovery_loss(fit.model, val_set)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

RecoveryRun run_recovery(const RecoveryRunConfig& config, std::uint64_t seed, RecoveryArtifacts* artifacts) {
  const int d = config.domain.dim();
  const auto uniform = ScalarField::constant(1.0);
  const auto raw_train = sample_points(config.domain, uniform, config.n, seed);
  const auto raw_test = sample_points(config.domain, uniform, config.test_points, seed ^ 0x9e3779b97f4a7c15ULL);
  const auto [train_cloud, stats] = normalize(raw_train);
  PointCloud test_cloud = raw_test;
  for (auto& p : test_cloud.points) p = stats.apply(p);

  const double eps = eps_scaling(static_cast<double>(config.n), d, config.eps_scale, config.eps_rule);
  const Kernel kernel(KernelProfile::ExpSquare);
  const PairFilter filter = [&](const Point& a, const Point& b) {
    return segment_in_domain(stats.invert(a), stats.invert(b), config.domain, config.segment_checks);
  };
  const auto data = synthesize_weights(train_cloud, config.g_true, eps, kernel, config.quadrature, filter);
  const auto val = synthesize_weights(test_cloud, config.g_true, eps, kernel, config.quadrature, filter);
  if (data.size() == 0) throw NumericalError("run_recovery: no admissible training pairs");

  TrainConfig tc = config.train;
  tc.seed = seed;
  auto fit = train(MlpField::random(d, seed), data, tc);

  RecoveryRun run;
  run.n = config.n;
  run.seed = seed;
  run.eps = eps;
  run.pairs = data.size();
  run.val_pairs = val.size();
  run.iterations = fit.iterations;
  run.reason = fit.reason;
  run.metrics = evaluate_recovery(fit.model.as_field(), config.g_true, test_cloud.points, d);
  run.metrics.final_loss = fit.best_loss;
  run.metrics.val_loss = val.size() ? recovery_loss(fit.model, val) : std::numeric_limits<double>::quiet_NaN();
  if (artifacts) {
    artifacts->fit = std::move(fit);
    artifacts->train_pairs = data;
    artifacts->val_pairs = val;
    artifacts->test_points = test_cloud.points;
    artifacts->stats = stats;
  }
  return run;
}

RecoverySweep recovery_sweep(const RecoveryRunConfig& config, std::span<const std::size_t> n_values, int seeds,
                             std::uint64_t base_seed, int threads, double converged_threshold) {
  if (seeds < 1) throw ConfigError("recovery_sweep: seeds must be >= 1");
  RecoverySweep sweep;
  const std::size_t per_n = static_cast<std::size_t>(seeds);
  sweep.runs.resize(n_values.size() * per_n);
  parallel_for(sweep.runs.size(), threads, [&](std::size_t task) {
    RecoveryRunConfig c = config;
    c.n = n_values[task / per_n];
    sweep.runs[task] = run_recovery(c, base_seed + task % per_n);
  });
  for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
    RecoverySweepRow row;
    row.n = n_values[ni];
    std::vector<double> fl, vl, mae, rmse, rmae, rrmse;
    for (std::size_t s = 0; s < per_n; ++s) {
      const auto& r = sweep.runs[ni * per_n + s];
      fl.push_back(r.metrics.final_loss);
      if (std::isfinite(r.metrics.val_loss) && r.metrics.val_loss > 0.0) vl.push_back(r.metrics.val_loss);
      mae.push_back(r.metrics.mae);
      rmse.push_back(r.metrics.rmse);
      rmae.push_back(r.metrics.rmae);
      rrmse.push_back(r.metrics.rrmse);
      if (r.metrics.final_loss <= converged_threshold) ++row.converged;
    }
    row.runs = per_n;
    row.final_loss = aggregate_log_stats(fl);
    if (!vl.empty()) row.val_loss = aggregate_log_stats(vl);
    row.mae = aggregate_log_stats(mae);
    row.rmse = aggregate_log_stats(rmse);
    row.rmae = aggregate_log_stats(rmae);
    row.rrmse = aggregate_log_stats(rrmse);
    sweep.rows.push_back(row);
  }
  return sweep;
}

}  // namespace wgdiff

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "wgdiff/core.hpp"
#include "wgdiff/fields.hpp"
#include "wgdiff/geometry.hpp"
#include "wgdiff/graph.hpp"
#include "wgdiff/metric.hpp"

namespace wgdiff {

/// Fixed [d, 8, 8, 1] perceptron: SiLU after the two hidden layers and
/// Softplus on the output, so the field is positive.
///
/// Flat parameter layout: W1 (8 x d, row-major), b1 (8), W2 (8 x 8), b2 (8),
/// W3 (8), b3 (1).
class MlpField {
 public:
  static constexpr int kHidden = 8;

  explicit MlpField(int dim = 3);
  /// Uniform in +-1/sqrt(fan_in) for every weight and bias of a layer.
  static MlpField random(int dim, std::uint64_t seed);

  static std::size_t param_count(int dim) { return static_cast<std::size_t>(kHidden * dim + 89); }

  int dim() const { return dim_; }
  std::size_t size() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  double operator()(const Point& p) const;
  /// Adds d value / d params, scaled by `upstream`, into grad; returns the value.
  double forward_backward(const Point& p, double upstream, std::span<double> grad) const;

  /// Immutable snapshot usable wherever a ScalarField is expected.
  ScalarField as_field() const;

 private:
  int dim_;
  std::vector<double> params_;
};

double silu(double x);
double softplus(double x);

/// Checkpoint: magic "WGDMLP01", uint32 format version, uint32 layer count,
/// uint32 widths, uint64 parameter count, float64 parameters (little-endian).
void write_checkpoint(std::ostream& out, const MlpField& model);
MlpField read_checkpoint(std::istream& in);

/// Training pairs with their generation parameters.
struct PairDataset {
  int dim = 3;
  double eps = 0.0;
  SegmentQuadrature quadrature{};
  std::vector<std::uint32_t> i, j;
  std::vector<Point> xi, xj;
  std::vector<double> weight;  ///< w_ij = eta(t_ij)
  std::vector<double> target;  ///< eta^{-1}(w_ij)

  std::size_t size() const { return weight.size(); }
  PairDataset subset(std::span<const std::size_t> rows) const;
};

/// Extra admission test for a pair of (normalized) points, e.g. segment_in_domain
/// after mapping back to raw coordinates. Empty means every pair is admissible.
using PairFilter = std::function<bool(const Point&, const Point&)>;

/// All pairs i < j with |x_i - x_j| < eps that pass the filter; t_ij is the
/// segment quadrature of g_true and w_ij = eta(t_ij). Throws NumericalError
/// when eta cannot be inverted at a produced weight.
PairDataset synthesize_weights(const PointCloud& cloud, const ScalarField& g_true, double eps, const Kernel& kernel,
                               const SegmentQuadrature& quadrature, const PairFilter& filter = {});

/// CSV `i,j,xi...,xj...,w_ij,eta_inv_target`.
void write_dataset_csv(std::ostream& out, const PairDataset& data);

/// Mean squared residual between the model's segment quadrature and the targets.
double recovery_loss(const MlpField& model, const PairDataset& data);
/// Same loss with its parameter gradient (grad is resized and overwritten).
double recovery_loss_gradient(const MlpField& model, const PairDataset& data, std::vector<double>& grad);
/// Loss of an arbitrary field (used for the zero-residual check with g_true).
double recovery_loss(const ScalarField& field, const PairDataset& data);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_iterations = 200'000;
  double loss_threshold = 1e-7;
  std::size_t patience = 5'000;
  double min_improvement = 1e-9;
  std::uint64_t seed = 1;
  int folds = 5;
};

void validate(const TrainConfig& config);

enum class StopReason { Threshold, Plateau, IterationCap };
std::string to_string(StopReason reason);

struct TrainResult {
  MlpField model;               ///< best-loss parameters
  double best_loss = 0.0;
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;
  StopReason reason = StopReason::IterationCap;
  std::vector<double> trace;    ///< loss before each update
};

/// Raised when the loss becomes non-finite; carries the trace up to that point.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

/// Full-batch Adam. Deterministic for a given model, dataset and config.
TrainResult train(const MlpField& initial, const PairDataset& data, const TrainConfig& config);

struct RecoveryMetrics {
  double mae = 0.0, rmse = 0.0;    ///< on g
  double rmae = 0.0, rrmse = 0.0;  ///< relative, on D = 1 / g^{d+2}
  double final_loss = 0.0;
  double val_loss = 0.0;
};

/// Errors of `model` against g_true at the test points. Throws NumericalError
/// when g_true <= 0 at a test point.
RecoveryMetrics evaluate_recovery(const ScalarField& model, const ScalarField& g_true,
                                  std::span<const Point> test_points, int dim);

struct LogStats {
  double geometric_mean = 0.0;
  double multiplicative_std = 1.0;  ///< exp of the population std of the logs
};

/// Throws ConfigError on an empty input or a nonpositive value.
LogStats aggregate_log_stats(std::span<const double> values);

struct FoldResult {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Seeded shuffle of the pairs into k folds; each fold trains a fresh model
/// (seed + fold) on the other k - 1 folds.
std::vector<FoldResult> kfold_cv(const PairDataset& data, const TrainConfig& config, int k);

// ---------------------------------------------------------------------------
// Synthetic recovery experiment

struct RecoveryRunConfig {
  Domain domain = Domain::voxel_mask(make_ellipsoid_mask(3, {56, 44, 36}, {0.05, 0.05, 0.05}, {1.4, 1.1, 0.9}));
  ScalarField g_true = ScalarField::sigmoid_radial({});
  std::size_t n = 400;
  std::size_t test_points = 200;
  EpsRule eps_rule = EpsRule::PerDPlus2;
  double eps_scale = 1.0;
  SegmentQuadrature quadrature{8, QuadratureRule::Trapezoid};
  TrainConfig train{};
  /// Checks per segment for segment_in_domain in raw coordinates.
  int segment_checks = 16;
};

struct RecoveryRun {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double eps = 0.0;
  std::size_t pairs = 0;
  std::size_t val_pairs = 0;
  std::size_t iterations = 0;
  StopReason reason = StopReason::IterationCap;
  RecoveryMetrics metrics;
};

/// Intermediate products of a run, for inspection and file output.
struct RecoveryArtifacts {
  TrainResult fit;
  PairDataset train_pairs, val_pairs;
  std::vector<Point> test_points;  ///< normalized coordinates
  NormalizationStats stats;
};

/// One seeded run: sample n training and test_points test points, normalize
/// with the training statistics, synthesize, train and evaluate.
RecoveryRun run_recovery(const RecoveryRunConfig& config, std::uint64_t seed, RecoveryArtifacts* artifacts = nullptr);

struct RecoverySweepRow {
  std::size_t n = 0;
  LogStats final_loss, val_loss, mae, rmse, rmae, rrmse;
  std::size_t runs = 0;
  std::size_t converged = 0;  ///< runs with final loss <= the reporting threshold
};

struct RecoverySweep {
  std::vector<RecoveryRun> runs;
  std::vector<RecoverySweepRow> rows;
};

/// Seeds base_seed + s for s < seeds at every n; runs execute on `threads` workers.
RecoverySweep recovery_sweep(const RecoveryRunConfig& config, std::span<const std::size_t> n_values, int seeds,
                             std::uint64_t base_seed, int threads, double converged_threshold = 1e-6);

}  // namespace wgdiff

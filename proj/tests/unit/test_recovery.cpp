#include "doctest.h"
#include "wgdiff/recovery.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace wgdiff;

namespace {

// Straightforward forward pass over the flat parameter layout, written
// independently of the library's batched and scalar evaluators.
double reference_forward(const std::vector<double>& w, int d, const Point& p) {
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::size_t k = 0;
  std::vector<double> W1(w.begin(), w.begin() + 8 * d);
  k += 8 * d;
  std::vector<double> b1(w.begin() + k, w.begin() + k + 8);
  k += 8;
  std::vector<double> W2(w.begin() + k, w.begin() + k + 64);
  k += 64;
  std::vector<double> b2(w.begin() + k, w.begin() + k + 8);
  k += 8;
  std::vector<double> W3(w.begin() + k, w.begin() + k + 8);
  k += 8;
  const double b3 = w[k];
  double h1[8], h2[8];
  for (int r = 0; r < 8; ++r) {
    double z = b1[r];
    for (int c = 0; c < d; ++c) z += W1[r * d + c] * p[c];
    h1[r] = z * sig(z);
  }
  for (int r = 0; r < 8; ++r) {
    double z = b2[r];
    for (int c = 0; c < 8; ++c) z += W2[r * 8 + c] * h1[c];
    h2[r] = z * sig(z);
  }
  double z = b3;
  for (int c = 0; c < 8; ++c) z += W3[c] * h2[c];
  return std::log(1.0 + std::exp(z));
}

PointCloud random_cloud(int dim, std::size_t n, std::uint64_t seed) {
  return sample_points(Domain::ball(dim, {0, 0, 0}, 1.0), ScalarField::constant(1.0), n, seed);
}

}  // namespace

TEST_CASE("zero network evaluates to ln 2") {
  const MlpField m(3);
  CHECK(m.size() == 113);
  CHECK(MlpField::param_count(1) == 97);
  CHECK(m({0.3, -1.0, 2.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("output is monotone in the output bias") {
  MlpField m = MlpField::random(2, 3);
  const Point p{0.4, -0.2, 0};
  double prev = 0.0;
  for (double b : {-40.0, -5.0, 0.0, 1.0, 10.0, 50.0}) {
    m.params().back() = b;
    const double v = m(p);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("forward pass matches an independent implementation") {
  for (int d = 1; d <= 3; ++d) {
    const MlpField m = MlpField::random(d, 17 + d);
    for (const Point& p : {Point{0.1, 0.2, 0.3}, Point{-1.5, 0.7, 2.0}}) {
      CHECK(std::abs(m(p) - reference_forward(m.params(), d, p)) < 1e-10);
      CHECK(std::abs(m.as_field()(p) - m(p)) == 0.0);
    }
  }
}

TEST_CASE("output is positive for arbitrary parameters") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 5.0);
  MlpField m(3);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& w : m.params()) w = nd(rng);
    CHECK(m({nd(rng), nd(rng), nd(rng)}) > 0.0);
  }
}

TEST_CASE("synthesized weights") {
  PointCloud c;
  c.dim = 2;
  c.points = {{0, 0, 0}, {0.3, 0, 0}, {5, 5, 0}};
  const Kernel k(KernelProfile::ExpSquare);
  const auto data = synthesize_weights(c, ScalarField::constant(1.0), 1.0, k, {8});
  REQUIRE(data.size() == 1);
  CHECK(data.weight[0] == doctest::Approx(0.913931).epsilon(1e-6));
  CHECK(std::abs(data.target[0] - 0.3) < 1e-12);

  const auto none = synthesize_weights(c, ScalarField::constant(1.0), 1.0, k, {8},
                                       [](const Point&, const Point& b) { return b[0] < 0.1; });
  CHECK(none.size() == 0);
  CHECK_THROWS_AS(synthesize_weights(c, ScalarField::constant(1.0), 1.0, Kernel(KernelProfile::Indicator), {8}), ConfigError);
}

TEST_CASE("loss zero point and constant offset") {
  const auto cloud = random_cloud(3, 60, 4);
  const auto g = ScalarField::sigmoid_radial({2.0, 0.5, 0.5});
  const Kernel k(KernelProfile::ExpSquare);
  const auto data = synthesize_weights(cloud, g, 0.8, k, {8});
  REQUIRE(data.size() > 10);
  CHECK(recovery_loss(g, data) < 1e-20);

  const double delta = 0.01;
  const auto shifted = ScalarField::custom([g, delta](const Point& p) { return g(p) + delta; });
  double mean_sq = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) mean_sq += std::pow(distance(data.xi[r], data.xj[r]), 2) / data.size();
  CHECK(recovery_loss(shifted, data) == doctest::Approx(delta * delta * mean_sq).epsilon(1e-9));

  // A model trained against its own synthesized data has zero loss.
  const MlpField m = MlpField::random(3, 1);
  const auto own = synthesize_weights(cloud, m.as_field(), 0.8, k, {8});
  CHECK(recovery_loss(m, own) < 1e-20);
  CHECK(recovery_loss(m, data) == doctest::Approx(recovery_loss(m.as_field(), data)).epsilon(1e-12));
}

TEST_CASE("backprop gradient matches central differences") {
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 3;
    const auto cloud = random_cloud(d, 30, 100 + trial);
    const auto data = synthesize_weights(cloud, ScalarField::cosine_radial({}), 1.2, Kernel(KernelProfile::ExpSquare),
                                         {4 + trial % 5, trial % 2 ? QuadratureRule::PaperLiteral : QuadratureRule::Trapezoid});
    REQUIRE(data.size() > 0);
    MlpField m = MlpField::random(d, 500 + trial);
    std::vector<double> grad;
    recovery_loss_gradient(m, data, grad);
    REQUIRE(grad.size() == m.size());
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
      const double w0 = m.params()[p];
      const double h = 1e-5 * std::max(1.0, std::abs(w0));
      m.params()[p] = w0 + h;
      const double fp = recovery_loss(m, data);
      m.params()[p] = w0 - h;
      const double fm = recovery_loss(m, data);
      m.params()[p] = w0;
      const double fd = (fp - fm) / (2.0 * h);
      num += (fd - grad[p]) * (fd - grad[p]);
      den += grad[p] * grad[p];
    }
    CHECK(std::sqrt(num / den) < 1e-5);
  }
}

TEST_CASE("training never returns a worse model and is deterministic") {
  const auto cloud = random_cloud(2, 60, 6);
  const MlpField init = MlpField::random(2, 9);
  const auto data = synthesize_weights(cloud, init.as_field(), 0.7, Kernel(KernelProfile::ExpSquare), {6});
  TrainConfig tc;
  tc.max_iterations = 300;
  const auto a = train(init, data, tc);
  const auto b = train(init, data, tc);
  CHECK(a.best_loss <= recovery_loss(init, data));
  CHECK(a.trace == b.trace);
  CHECK(a.model.params() == b.model.params());

  const auto target = synthesize_weights(cloud, ScalarField::sigmoid_radial({}), 0.7, Kernel(KernelProfile::ExpSquare), {6});
  const auto fit = train(init, target, tc);
  CHECK(fit.best_loss < recovery_loss(init, target));
  CHECK(fit.best_loss == doctest::Approx(recovery_loss(fit.model, target)).epsilon(1e-12));
  CHECK(fit.trace.size() == fit.iterations);

  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(train(init, target, tc), ConfigError);
}

TEST_CASE("training stops at the threshold") {
  const auto cloud = random_cloud(2, 40, 6);
  const MlpField init = MlpField::random(2, 9);
  const auto data = synthesize_weights(cloud, init.as_field(), 0.7, Kernel(KernelProfile::ExpSquare), {6});
  const auto fit = train(init, data, {});
  CHECK(fit.reason == StopReason::Threshold);
  CHECK(fit.iterations == 1);
}

TEST_CASE("recovery metrics") {
  const auto one = ScalarField::constant(1.0);
  const std::vector<Point> pts{{0, 0, 0}, {0.5, 0.1, 0}, {-0.3, 0.2, 0.9}};
  const auto exact = evaluate_recovery(one, one, pts, 3);
  CHECK(exact.mae == 0.0);
  CHECK(exact.rmse == 0.0);
  CHECK(exact.rmae == 0.0);
  CHECK(exact.rrmse == 0.0);
  const auto off = evaluate_recovery(ScalarField::constant(1.01), one, pts, 3);
  CHECK(off.mae == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(off.rmse == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(off.rmae == doctest::Approx(1.0 - std::pow(1.01, -5.0)).epsilon(1e-12));
  CHECK(off.rmae == doctest::Approx(0.0485).epsilon(1e-3));
  CHECK(off.rrmse >= off.rmae);
  CHECK_THROWS_AS(evaluate_recovery(one, ScalarField::constant(0.0), pts, 3), NumericalError);
}

TEST_CASE("log statistics") {
  const double e = std::exp(1.0);
  const auto a = aggregate_log_stats(std::vector<double>{e, e});
  CHECK(a.geometric_mean == doctest::Approx(e));
  CHECK(a.multiplicative_std == doctest::Approx(1.0));
  CHECK(aggregate_log_stats(std::vector<double>{1.0, e * e}).geometric_mean == doctest::Approx(e));
  CHECK(aggregate_log_stats(std::vector<double>{1, 2, 4, 8}).geometric_mean == doctest::Approx(2.828427).epsilon(1e-6));
  CHECK_THROWS_AS(aggregate_log_stats(std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(aggregate_log_stats(std::vector<double>{1.0, -1.0}), ConfigError);
}

TEST_CASE("k-fold cross-validation") {
  const auto cloud = random_cloud(2, 25, 12);
  const MlpField exact = MlpField::random(2, 4);
  const auto data = synthesize_weights(cloud, exact.as_field(), 0.6, Kernel(KernelProfile::ExpSquare), {4});
  REQUIRE(data.size() >= 3);
  TrainConfig tc;
  tc.max_iterations = 20;
  const auto loo = kfold_cv(data, tc, static_cast<int>(data.size()));
  CHECK(loo.size() == data.size());
  for (const auto& f : loo) CHECK(std::isfinite(f.val_loss));
  CHECK_THROWS_AS(kfold_cv(data, tc, 1), ConfigError);
  CHECK_THROWS_AS(kfold_cv(data, tc, static_cast<int>(data.size()) + 1), ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
  const MlpField m = MlpField::random(3, 77);
  std::stringstream buf;
  write_checkpoint(buf, m);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "WGDMLP01");
  CHECK(bytes.size() == 8 + 4 + 4 + 4 * 4 + 8 + 8 * m.size());
  std::stringstream in(bytes);
  const auto back = read_checkpoint(in);
  CHECK(back.dim() == 3);
  CHECK(back.params() == m.params());
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream badin(bad);
  CHECK_THROWS_AS(read_checkpoint(badin), IoError);
}

TEST_CASE("dataset csv layout") {
  PointCloud c;
  c.dim = 2;
  c.points = {{0, 0, 0}, {0.3, 0, 0}};
  const auto data = synthesize_weights(c, ScalarField::constant(1.0), 1.0, Kernel(KernelProfile::ExpSquare), {8});
  std::ostringstream out;
  write_dataset_csv(out, data);
  const std::string s = out.str();
  CHECK(s.substr(0, s.find('\n')) == "i,j,xi0,xi1,xj0,xj1,w_ij,eta_inv_target");
}

TEST_CASE("five-fold validation tracks the training loss on sigmoid data") {
  RecoveryRunConfig rc;
  rc.n = 200;
  RecoveryArtifacts art;
  run_recovery(rc, 3, &art);
  TrainConfig tc;
  tc.max_iterations = 20000;
  const auto folds = kfold_cv(art.train_pairs, tc, 5);
  double tr = 0.0, va = 0.0;
  for (const auto& f : folds) {
    tr += f.train_loss / 5.0;
    va += f.val_loss / 5.0;
  }
  CHECK(va <= 10.0 * tr);
}

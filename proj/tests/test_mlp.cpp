#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <enanom/mlp.hpp>

using namespace enanom;

namespace {

MlpConfig small_config(std::vector<std::size_t> hidden, double dropout = 0.0, std::uint64_t seed = 1) {
  MlpConfig c;
  c.hidden_layers = std::move(hidden);
  c.dropout_p = dropout;
  c.seed = seed;
  return c;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<double> row(const Matrix& m, Eigen::Index r) {
  return {m.row(r).data(), m.row(r).data() + m.cols()};
}

}  // namespace

TEST(MlpInit, Deterministic) {
  const auto a = MlpModel::init(small_config({8, 4}), 5);
  const auto b = MlpModel::init(small_config({8, 4}), 5);
  ASSERT_EQ(a.layers().size(), b.layers().size());
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    EXPECT_EQ(a.layers()[l].weights, b.layers()[l].weights);
    EXPECT_EQ(a.layers()[l].bias, b.layers()[l].bias);
  }
  const auto c = MlpModel::init(small_config({8, 4}, 0.0, 2), 5);
  EXPECT_NE(a.layers()[0].weights, c.layers()[0].weights);
}

TEST(MlpInit, ShapesChain) {
  const auto m = MlpModel::init(small_config({2, 2}), 3);
  ASSERT_EQ(m.layers().size(), 3u);
  EXPECT_EQ(m.layers()[0].weights.rows(), 3);
  EXPECT_EQ(m.layers()[0].weights.cols(), 2);
  EXPECT_EQ(m.layers()[1].weights.rows(), 2);
  EXPECT_EQ(m.layers()[1].weights.cols(), 2);
  EXPECT_EQ(m.layers()[2].weights.rows(), 2);
  EXPECT_EQ(m.layers()[2].weights.cols(), 1);
  for (const auto& l : m.layers()) EXPECT_TRUE(l.bias.isZero());
}

TEST(MlpInit, WeightMeanWithinThreeStandardErrors) {
  const std::size_t fan_in = 1000;
  const auto m = MlpModel::init(small_config({1000}), fan_in);
  const auto& w = m.layers()[0].weights;
  ASSERT_EQ(w.size(), 1000000);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  const double se = limit / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LT(std::abs(w.mean()), 3.0 * se);
  EXPECT_LE(w.maxCoeff(), limit);
  EXPECT_GE(w.minCoeff(), -limit);
}

TEST(MlpConfig, Validation) {
  EXPECT_THROW(MlpModel::init(small_config({4, 0}), 3), DomainError);
  EXPECT_THROW(MlpModel::init(small_config({4}, 1.0), 3), DomainError);
  EXPECT_THROW(MlpModel::init(small_config({4}), 0), DomainError);
  auto c = small_config({4});
  c.epochs = 0;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_NO_THROW(MlpConfig{}.validate());
  EXPECT_EQ(MlpConfig{}.hidden_layers, std::vector<std::size_t>(5, 1024));
  EXPECT_EQ(MlpConfig{}.dropout_p, 0.5);
}

TEST(MlpForward, ZeroNetworkOutputsZero) {
  auto m = MlpModel::init(small_config({6, 6}), 4);
  for (auto& l : m.layers()) l.weights.setZero();
  const std::vector<double> x = {1, -2, 3, 4};
  EXPECT_EQ(m.forward(x), 0.0);
  EXPECT_EQ(m.forward(x, Mode::infer), 0.0);
}

TEST(MlpForward, LinearModelIsAffine) {
  auto m = MlpModel::init(small_config({}), 3);
  m.layers()[0].weights << 0.5, -1.0, 2.0;
  m.layers()[0].bias << 0.25;
  const std::vector<double> x = {2, 3, -1};
  EXPECT_DOUBLE_EQ(m.forward(x), 0.5 * 2 - 1.0 * 3 + 2.0 * -1 + 0.25);
}

TEST(MlpForward, WidthMismatch) {
  auto m = MlpModel::init(small_config({4}), 3);
  const std::vector<double> x = {1, 2};
  EXPECT_THROW(m.forward(x), ShapeError);
  EXPECT_THROW(m.predict_batch(Matrix::Ones(2, 4)), ShapeError);
}

TEST(MlpForward, InvertedDropoutMatchesInferenceInExpectation) {
  auto m = MlpModel::init(small_config({64}, 0.5, 9), 6);
  // Positive output weights keep the expectation well away from zero.
  m.layers()[1].weights = m.layers()[1].weights.cwiseAbs();
  const std::vector<double> x = {0.3, -1.2, 0.8, 1.5, -0.4, 0.9};
  const double expected = m.forward(x);
  ASSERT_GT(std::abs(expected), 0.5);
  double sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) sum += m.forward(x, Mode::train);
  EXPECT_NEAR(sum / draws, expected, 0.02 * std::abs(expected));
  // Train mode is actually stochastic.
  EXPECT_NE(m.forward(x, Mode::train), m.forward(x, Mode::train));
}

TEST(MlpPredict, BatchMatchesRowwiseForward) {
  const auto m = MlpModel::init(small_config({16, 8}), 5);
  const Matrix x = random_matrix(40, 5, 3);
  const auto batch = m.predict_batch(x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) EXPECT_EQ(batch[static_cast<std::size_t>(r)], m.forward(row(x, r)));
  EXPECT_EQ(m.predict_batch(x.topRows(1)), std::vector<double>{m.forward(row(x, 0))});

  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  const auto permuted = m.predict_batch(take_rows(x, perm));
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(permuted[i], batch[perm[i]]);

  auto halves = m.predict_batch(x.topRows(20));
  const auto second = m.predict_batch(x.bottomRows(20));
  halves.insert(halves.end(), second.begin(), second.end());
  EXPECT_EQ(halves, batch);
  EXPECT_EQ(m.predict_batch(x), batch);
}

TEST(MlpTrain, LearnsLinearFunction) {
  const int n = 500;
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) / (n - 1);
    y[static_cast<std::size_t>(i)] = 2.0 * x(i, 0) + 1.0;
  }
  auto c = small_config({32, 32});
  c.epochs = 200;
  c.batch_size = 32;
  auto m = MlpModel::init(c, 1);
  const auto report = train(m, x, y, c);
  EXPECT_LT(report.final_loss, report.initial_loss);

  // Held-out points between the training grid.
  double err = 0.0;
  const int held = 97;
  for (int i = 0; i < held; ++i) {
    const double v = (i + 0.5) / held;
    err += std::abs(m.forward(std::vector<double>{v}) - (2.0 * v + 1.0));
  }
  EXPECT_LT(err / held, 0.05);
}

TEST(MlpTrain, StepAccountingAndDeterminism) {
  const Matrix x = random_matrix(130, 3, 5);
  std::vector<double> y(130);
  for (int i = 0; i < 130; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) - 2.0 * x(i, 2);
  auto c = small_config({8}, 0.5);
  c.epochs = 1;
  auto a = MlpModel::init(c, 3);
  const auto ra = train(a, x, y, c);
  EXPECT_EQ(ra.optimizer_steps, 3u);
  EXPECT_EQ(a.steps(), 3u);
  ASSERT_EQ(ra.epoch_losses.size(), 1u);

  c.epochs = 4;
  auto b1 = MlpModel::init(c, 3), b2 = MlpModel::init(c, 3);
  const auto r1 = train(b1, x, y, c), r2 = train(b2, x, y, c);
  EXPECT_EQ(r1.epoch_losses, r2.epoch_losses);
  EXPECT_EQ(r1.final_loss, r2.final_loss);
  EXPECT_EQ(b1.layers()[0].weights, b2.layers()[0].weights);
  EXPECT_EQ(r1.optimizer_steps, 12u);
  for (const double l : r1.epoch_losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(MlpTrain, Errors) {
  const Matrix x = random_matrix(100, 2, 6);
  std::vector<double> y(100, 1.0);
  y[3] = 4.0;
  auto c = small_config({8});
  c.batch_size = 101;
  auto m = MlpModel::init(c, 2);
  EXPECT_THROW(train(m, x, y, c), DomainError);

  c.batch_size = 10;
  c.adam.learning_rate = 1e300;
  auto d = MlpModel::init(c, 2);
  try {
    train(d, x, y, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
  std::vector<double> short_y(99, 0.0);
  EXPECT_THROW(train(m, x, short_y, c), ShapeError);
}

TEST(GradientCheck, RandomTwoLayerNet) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  std::vector<double> x(4);
  for (auto& v : x) v = g(rng);
  const auto r = gradient_check(small_config({5, 3}, 0.5, 77), x, 3.0);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradientCheck, SingleWeightLinearModel) {
  auto m = MlpModel::init(small_config({}), 1);
  m.layers()[0].weights(0, 0) = 1.0;
  Matrix x(1, 1);
  x(0, 0) = 2.0;
  Vector t(1);
  t(0) = 5.0;
  MlpModel::Cache cache;
  const Vector out = m.forward_batch(x, false, &cache);
  const auto grads = m.backward(cache, out, t);
  EXPECT_DOUBLE_EQ(std::abs(grads[0].weights(0, 0)), 2.0);
  EXPECT_DOUBLE_EQ(grads[0].weights(0, 0), -2.0);  // output below target

  const std::vector<double> xs = {2.0};
  const auto r = gradient_check(m, xs, 5.0);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradientCheck, KinkIsSkippedNotFailed) {
  const auto m = MlpModel::init(small_config({3}), 2);
  const std::vector<double> x = {0.4, -0.7};
  const double at_output = m.forward(x);
  const auto r = gradient_check(m, x, at_output);
  EXPECT_EQ(r.checked, 0u);
  EXPECT_EQ(r.skipped, 2u * 3u + 3u + 3u * 1u + 1u);
  EXPECT_EQ(r.max_relative_error, 0.0);
}

TEST(MlpRestore, ReproducesPredictions) {
  const Matrix x = random_matrix(80, 3, 8);
  std::vector<double> y(80);
  for (int i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = 10.0 + x(i, 1);
  auto c = small_config({8, 8});
  c.epochs = 2;
  auto m = MlpModel::init(c, 3);
  train(m, x, y, c);
  auto layers = m.layers();
  const auto r = MlpModel::restore(c, 3, layers, m.target_mean(), m.target_scale());
  EXPECT_EQ(r.predict_batch(x), m.predict_batch(x));
  layers.pop_back();
  EXPECT_THROW(MlpModel::restore(c, 3, layers, 0.0, 1.0), ShapeError);
}

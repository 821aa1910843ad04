#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <enanom/metrics.hpp>

using namespace enanom;

TEST(Mape, Examples) {
  const std::vector<double> p1 = {110}, o1 = {100};
  const auto r = mape(p1, o1);
  EXPECT_EQ(r.percent, 10.0);
  EXPECT_EQ(r.band, MapeBand::high);
  EXPECT_EQ(band_name(r.band), "high");
  EXPECT_EQ(mape(o1, o1).percent, 0.0);
  const std::vector<double> p2 = {90, 110}, o2 = {100, 100};
  EXPECT_EQ(mape(p2, o2).percent, 10.0);
  EXPECT_EQ(mape(p2, o2, true).percent, 0.0);
}

TEST(Mape, Bands) {
  EXPECT_EQ(mape_band(10.0), MapeBand::high);
  EXPECT_EQ(mape_band(10.5), MapeBand::good);
  EXPECT_EQ(mape_band(20.0), MapeBand::good);
  EXPECT_EQ(mape_band(35.0), MapeBand::reasonable);
  EXPECT_EQ(mape_band(50.1), MapeBand::inaccurate);
}

TEST(Mape, ZeroObservationsExcluded) {
  const std::vector<double> p = {5, 110, 3}, o = {0, 100, 0};
  const auto r = mape(p, o);
  EXPECT_EQ(r.percent, 10.0);
  EXPECT_EQ(r.used, 1u);
  EXPECT_EQ(r.excluded_zero, 2u);
  const std::vector<double> zeros = {0, 0};
  EXPECT_THROW(mape(zeros, zeros), DomainError);
}

TEST(Rmse, Examples) {
  const std::vector<double> zero = {0, 0, 0};
  EXPECT_EQ(rmse(std::vector<double>{3, -3}, std::vector<double>{0, 0}), 3.0);
  EXPECT_EQ(rmse(zero, zero), 0.0);
  EXPECT_NEAR(rmse(std::vector<double>{1, 2, 2}, zero), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(rmse(std::vector<double>{1, 2, 2}, zero), 1.7320508, 1e-7);
  EXPECT_THROW(rmse(std::vector<double>{1}, zero), ShapeError);
  EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), DomainError);
}

TEST(Mae, Examples) {
  const std::vector<double> zero = {0, 0, 0};
  EXPECT_EQ(mae(std::vector<double>{1, -1}, std::vector<double>{0, 0}), 1.0);
  EXPECT_EQ(mae(zero, zero), 0.0);
  EXPECT_EQ(mae(std::vector<double>{1, 2, 6}, zero), 3.0);
  EXPECT_THROW(mae(std::vector<double>{1}, zero), ShapeError);
}

TEST(RegressionMetrics, Invariants) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(100.0, 20.0);
  std::uniform_real_distribution<double> scale(0.1, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(30), o(30);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = g(rng);
      o[i] = g(rng);
    }
    const auto m = regression_metrics(p, o);
    EXPECT_GE(m.rmse, m.mae);
    EXPECT_GE(m.mae, 0.0);
    EXPECT_GE(m.mape.percent, 0.0);
    EXPECT_EQ(m.n, 30u);

    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp, op;
    for (const auto i : perm) {
      pp.push_back(p[i]);
      op.push_back(o[i]);
    }
    const auto mp = regression_metrics(pp, op);
    EXPECT_NEAR(mp.rmse, m.rmse, 1e-9);
    EXPECT_NEAR(mp.mae, m.mae, 1e-9);
    EXPECT_NEAR(mp.mape.percent, m.mape.percent, 1e-9);

    const double a = scale(rng);
    std::vector<double> ps = p, os = o;
    for (auto& v : ps) v *= a;
    for (auto& v : os) v *= a;
    EXPECT_NEAR(mape(ps, os).percent, m.mape.percent, 1e-9);
  }
  // Equality exactly when all absolute errors agree.
  const std::vector<double> o = {0, 0, 0, 0}, equal = {2, -2, 2, -2}, unequal = {1, -2, 2, -2};
  EXPECT_EQ(rmse(equal, o), mae(equal, o));
  EXPECT_GT(rmse(unequal, o), mae(unequal, o));
}

TEST(ClassificationMetrics, ConfusionExample) {
  // TP=3, FP=1, FN=1, TN=5
  const std::vector<bool> flags = {true, true, true, true, false, false, false, false, false, false};
  const std::vector<bool> truth = {true, true, true, false, true, false, false, false, false, false};
  const auto m = classification_metrics(flags, truth);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 5u);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.75);
  EXPECT_DOUBLE_EQ(m.f1, 0.75);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.8);
}

TEST(ClassificationMetrics, PerfectAndDegenerate) {
  const std::vector<bool> truth = {true, false, true, false};
  const auto perfect = classification_metrics(truth, truth);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const auto none = classification_metrics(std::vector<bool>(4, false), truth);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_TRUE(none.degenerate);
  EXPECT_THROW(classification_metrics({true}, truth), ShapeError);
}

TEST(ClassificationMetrics, Identities) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution b(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> f(50), t(50);
    for (std::size_t i = 0; i < 50; ++i) {
      f[i] = b(rng);
      t[i] = b(rng);
    }
    const auto m = classification_metrics(f, t);
    EXPECT_EQ(m.tp + m.fp + m.tn + m.fn, 50u);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(m.tp + m.tn) / 50.0);
    if (m.precision + m.recall > 0) {
      EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-15);
    }
  }
}

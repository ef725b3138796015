#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qrc/readout.hpp"

using namespace qrc;

namespace {

FeatureMatrix random_features(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureMatrix f;
  f.values.resize(rows, cols + 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) f.values(i, j) = g(rng);
    f.values(i, cols) = 1.0;
  }
  for (Eigen::Index j = 0; j < cols; ++j) f.labels.push_back("f" + std::to_string(j));
  f.labels.emplace_back("bias");
  return f;
}

TargetSeries as_targets(const RealVector& y) {
  TargetSeries t(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) t[static_cast<std::size_t>(i)] = y(i);
  return t;
}

std::vector<double> to_vec(const RealVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Train, RecoversSingleColumn) {
  const auto f = random_features(200, 6, 1);
  const auto r = train(f, as_targets(f.values.col(3)));
  for (Eigen::Index j = 0; j < r.weights.size(); ++j)
    EXPECT_NEAR(r.weights(j), j == 3 ? 1.0 : 0.0, 1e-10);
  EXPECT_LE(r.training_residual, 1e-10);
}

TEST(Train, ConstantTargetGoesToBias) {
  const auto f = random_features(100, 4, 2);
  const auto r = train(f, as_targets(RealVector::Constant(100, 0.42)));
  EXPECT_NEAR(r.weights(4), 0.42, 1e-12);
  EXPECT_LE(r.weights.head(4).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, PlantAndRecover) {
  const auto f = random_features(500, 10, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  RealVector w(11);
  for (auto& x : w) x = g(rng);
  RealVector y = f.values * w;
  for (auto& x : y) x += 1e-9 * g(rng);
  const auto r = train(f, as_targets(y));
  EXPECT_LE((r.weights - w).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Train, MissingTargetsAndRangeAreRespected) {
  auto f = random_features(60, 3, 5);
  RealVector y = f.values.col(0);
  auto t = as_targets(y);
  // corrupt rows that must be ignored
  for (std::size_t k = 0; k < 10; ++k) t[k].reset();
  for (Eigen::Index k = 50; k < 60; ++k) t[static_cast<std::size_t>(k)] = 1e6;
  const auto r = train(f, RowRange{0, 50}, t);
  EXPECT_NEAR(r.weights(0), 1.0, 1e-10);
  EXPECT_THROW(train(f, RowRange{0, 5}, t), Error);
  EXPECT_THROW(train(f, RowRange{0, 61}, t), Error);
}

TEST(Train, LocallyOptimal) {
  const auto f = random_features(80, 5, 6);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  RealVector y(80);
  for (auto& x : y) x = g(rng);
  const auto r = train(f, as_targets(y));
  const double base = (f.values * r.weights - y).norm();
  for (Eigen::Index j = 0; j < r.weights.size(); ++j)
    for (double d : {1e-4, -1e-4}) {
      RealVector w = r.weights;
      w(j) += d;
      EXPECT_GE((f.values * w - y).norm(), base);
    }
}

TEST(Train, ResidualMatchesPrediction) {
  const auto f = random_features(70, 4, 8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealVector y(70);
  for (auto& x : y) x = u(rng);
  const auto r = train(f, as_targets(y));
  const auto p = predict(r, f);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 70; ++i) acc += std::pow(p[i] - y(i), 2);
  EXPECT_NEAR(std::sqrt(acc), r.training_residual, 1e-12);
}

TEST(Train, RidgeShrinksWeights) {
  const auto f = random_features(50, 6, 10);
  RealVector y = f.values.col(2) + 0.5 * f.values.col(4);
  const auto plain = train(f, as_targets(y));
  const auto ridge = train(f, as_targets(y), {1e-10, 10.0});
  EXPECT_LT(ridge.weights.norm(), plain.weights.norm());
  EXPECT_THROW(train(f, as_targets(y), {1e-10, -1.0}), Error);
}

TEST(Train, NestedFeatureSetsNeverLoseCapacity) {
  const auto full = random_features(120, 8, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  RealVector y(120);
  for (auto& x : y) x = g(rng) + full.values(0, 0);
  for (Eigen::Index i = 0; i < 120; ++i) y(i) += 0.3 * full.values(i, 5);
  double prev = 0.0;
  for (Eigen::Index k = 1; k <= 8; ++k) {
    FeatureMatrix f;
    f.values.resize(120, k + 1);
    f.values.leftCols(k) = full.values.leftCols(k);
    f.values.col(k).setOnes();
    const auto r = train(f, as_targets(y));
    const double c = capacity(to_vec(y), predict(r, f));
    EXPECT_GE(c, prev - 1e-10);
    prev = c;
  }
}

TEST(Predict, ZeroWeightsAndIdentity) {
  const auto f = random_features(10, 2, 13);
  TrainedReadout r;
  r.weights = RealVector::Zero(3);
  for (double p : predict(r, f)) EXPECT_EQ(p, 0.0);
  r.weights(1) = 1.0;
  const auto p = predict(r, f);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(p[i], f.values(i, 1));
  EXPECT_THROW(predict_row(r, std::vector<double>(2)), Error);
}

TEST(Capacity, PerfectAffineAndDegenerate) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(500), z(500);
  for (auto& x : y) x = u(rng);
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = 3.5 * y[i] - 2.0;
  EXPECT_NEAR(capacity(y, y), 1.0, 1e-12);
  EXPECT_NEAR(capacity(y, z), 1.0, 1e-12);
  EXPECT_EQ(capacity(y, std::vector<double>(500, 0.7)), 0.0);
}

TEST(Capacity, AffineInvarianceOnNoisyPredictions) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(300), p(300), ps(300), ys(300);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = g(rng);
    p[i] = y[i] + 0.8 * g(rng);
    ps[i] = 0.01 * p[i] + 5.0;
    ys[i] = 40.0 * y[i] - 1.0;
  }
  const double c = capacity(y, p);
  EXPECT_NEAR(capacity(y, ps), c, 1e-12);
  EXPECT_NEAR(capacity(ys, p), c, 1e-12);
}

TEST(Capacity, ShuffledCopyIsUncorrelated) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(10000);
  for (auto& x : y) x = u(rng);
  auto p = y;
  std::shuffle(p.begin(), p.end(), rng);
  EXPECT_LE(capacity(y, p), 0.01);
}

TEST(Capacity, MatchesLoopOracle) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> y(50), p(50);
    for (std::size_t i = 0; i < 50; ++i) {
      y[i] = g(rng);
      p[i] = 0.5 * y[i] + g(rng);
    }
    // two-pass sample formula; the 1/n factors cancel in the ratio
    double sy = 0, sp = 0, syy = 0, spp = 0, syp = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      sy += y[i];
      sp += p[i];
    }
    for (std::size_t i = 0; i < 50; ++i) {
      const double a = y[i] - sy / 50, b = p[i] - sp / 50;
      syy += a * a;
      spp += b * b;
      syp += a * b;
    }
    EXPECT_NEAR(capacity(y, p), syp * syp / (syy * spp), 1e-12);
  }
}

TEST(Mse, HandValuesAndLoopOracle) {
  EXPECT_EQ(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  const std::vector<double> y{0.1, 0.4, 0.9};
  EXPECT_EQ(mse(y, y), 0.0);
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(40), b(40);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < 40; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(mse(a, b), acc / 40, 1e-15);
  EXPECT_THROW(mse(a, std::vector<double>(3)), Error);
}

TEST(Evaluate, SkipsMissingTargets) {
  const auto f = random_features(40, 3, 19);
  auto t = as_targets(f.values.col(1));
  t[20].reset();
  t[21] = 1e9;  // outside the evaluation range below
  const auto r = train(f, RowRange{0, 20}, t);
  EXPECT_NEAR(evaluate_capacity(r, f, RowRange{22, 40}, t), 1.0, 1e-12);
  const auto j = to_json(r);
  EXPECT_EQ(j["weights"].size(), 4u);
  EXPECT_EQ(j["labels"].back(), "bias");
}

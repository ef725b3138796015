#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qrc/tasks.hpp"

using namespace qrc;

namespace {

std::vector<double> valid(const TargetSeries& t) {
  std::vector<double> out;
  for (const auto& x : t)
    if (x) out.push_back(*x);
  return out;
}

}  // namespace

TEST(Inputs, UniformRangeMeanAndDeterminism) {
  const auto a = gen_uniform_inputs(100000, 12);
  EXPECT_EQ(a, gen_uniform_inputs(100000, 12));
  EXPECT_NE(a, gen_uniform_inputs(100000, 13));
  EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](double x) { return x >= 0.0 && x <= 1.0; }));
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  EXPECT_GE(mean, 0.49);
  EXPECT_LE(mean, 0.51);
}

TEST(Inputs, BinaryValues) {
  const auto b = gen_binary_inputs(1000, 3);
  EXPECT_TRUE(std::all_of(b.begin(), b.end(), [](double x) { return x == 0.0 || x == 1.0; }));
}

TEST(Stm, ShiftAndIdentity) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
  const auto y = stm_targets(s, 2);
  EXPECT_FALSE(y[0]);
  EXPECT_FALSE(y[1]);
  EXPECT_EQ(*y[2], 0.1);
  EXPECT_EQ(*y[3], 0.2);
  EXPECT_EQ(valid(stm_targets(s, 0)), s);
  EXPECT_THROW(stm_targets(s, 4), Error);
}

TEST(Narma, FirstTargetAndZeroInputFixedPoint) {
  const std::vector<double> zeros(3000, 0.0);
  const auto y = narma_targets(zeros, 10);
  EXPECT_DOUBLE_EQ(*y[0], 0.1);
  // fixed point of y = 0.3 y + 0.05 n y^2 + 0.1 at n = 10: 0.5 y^2 - 0.7 y + 0.1 = 0
  const double fixed = 0.7 - std::sqrt(0.29);
  EXPECT_NEAR(fixed, 0.161484, 1e-6);
  EXPECT_NEAR(*y.back(), fixed, 1e-12);
}

TEST(Narma, MatchesDirectRecursion) {
  const auto s = gen_uniform_inputs(300, 4);
  const std::size_t n = 5;
  const auto y = narma_targets(s, n);
  // 0-based oracle with explicit padding
  std::vector<double> yy(n + s.size(), 0.0), sp(n + s.size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) sp[n + i] = 0.02 * s[i];
  for (std::size_t k = n; k < yy.size(); ++k) {
    double w = 0.0;
    for (std::size_t j = 1; j <= n; ++j) w += yy[k - j];
    const double prev = yy[k - 1];
    const double sk1 = k - 1 >= n ? sp[k - 1] : 0.0;
    const double skn = k >= 2 * n ? sp[k - n] : 0.0;
    yy[k] = 0.3 * prev + 0.05 * prev * w + 1.5 * skn * sk1 + 0.1;
  }
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(*y[i], yy[n + i], 1e-15);
}

TEST(Narma, BoundedUpToOrderTwenty) {
  const auto s = gen_uniform_inputs(100000, 8);
  for (std::size_t n : {1u, 5u, 10u, 15u, 20u}) {
    const auto y = valid(narma_targets(s, n));
    EXPECT_GT(*std::min_element(y.begin(), y.end()), 0.0) << n;
    EXPECT_LT(*std::max_element(y.begin(), y.end()), 1.0) << n;
  }
}

TEST(Parity, HandValues) {
  const std::vector<double> s{1, 1, 0, 1};
  const auto y = parity_targets(s, 2);
  EXPECT_FALSE(y[1]);
  EXPECT_EQ(*y[2], 0.0);
  EXPECT_EQ(*y[3], 1.0);
  const auto one = parity_targets(s, 1);
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_EQ(*one[k], s[k - 1]);
  EXPECT_THROW(parity_targets(std::vector<double>{0.5, 1.0, 0.0}, 1), Error);
}

TEST(Parity, FlippingAnInputInsideTheWindowFlipsTheTarget) {
  auto s = gen_binary_inputs(50, 2);
  const auto y = parity_targets(s, 3);
  s[30] = 1.0 - s[30];
  const auto z = parity_targets(s, 3);
  for (std::size_t k = 31; k <= 33; ++k) EXPECT_NE(*y[k], *z[k]);
  EXPECT_EQ(*y[34], *z[34]);
  EXPECT_EQ(*y[30], *z[30]);
}

TEST(OneStep, ShiftAndMse) {
  const std::vector<double> s{0.1, 0.5, 0.2};
  const auto y = one_step_targets(s);
  EXPECT_EQ(*y[0], 0.5);
  EXPECT_EQ(*y[1], 0.2);
  EXPECT_FALSE(y[2]);

  const auto mg = mackey_glass_series({}, 500, 0);
  const auto t = valid(one_step_targets(mg));
  EXPECT_EQ(mse(t, t), 0.0);
  std::vector<double> ident(mg.begin(), mg.end() - 1);
  double diff = 0.0;
  for (std::size_t k = 0; k + 1 < mg.size(); ++k) diff += std::pow(mg[k + 1] - mg[k], 2);
  EXPECT_NEAR(mse(t, ident), diff / double(mg.size() - 1), 1e-15);
}

TEST(MackeyGlass, FixedPoints) {
  MackeyGlassConfig cfg;
  cfg.history_value = 1.0;
  for (double x : mackey_glass_raw(cfg, 50)) EXPECT_NEAR(x, 1.0, 1e-12);
  cfg.history_value = 0.0;
  for (double x : mackey_glass_raw(cfg, 50)) EXPECT_EQ(x, 0.0);
}

TEST(MackeyGlass, RescaledAndAperiodic) {
  const auto s = mackey_glass_series({}, 2000, 0);
  EXPECT_EQ(*std::min_element(s.begin(), s.end()), 0.0);
  EXPECT_EQ(*std::max_element(s.begin(), s.end()), 1.0);
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
  double var = 0.0;
  for (double x : s) var += (x - mean) * (x - mean);
  double peak = -1.0;
  for (std::size_t lag = 1; lag < 1000; ++lag) {
    double c = 0.0;
    for (std::size_t k = 0; k + lag < s.size(); ++k) c += (s[k] - mean) * (s[k + lag] - mean);
    peak = std::max(peak, c / var);
  }
  EXPECT_LT(peak, 0.99);
}

TEST(MackeyGlass, SeedShiftsWindow) {
  const auto a = mackey_glass_series({}, 300, 5), b = mackey_glass_series({}, 300, 5),
             c = mackey_glass_series({}, 300, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(MackeyGlass, StepRefinementConverges) {
  // halving the integration step changes the early samples very little
  MackeyGlassConfig coarse, fine;
  coarse.transient_discard = fine.transient_discard = 0.0;
  fine.integration_step = 0.05;
  const auto a = mackey_glass_raw(coarse, 60), b = mackey_glass_raw(fine, 60);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-5);
}

namespace {

ReservoirBank small_bank() {
  ReservoirSpec spec;
  spec.model = ModelKind::cd;
  spec.network = make_network(2, 1.0, 3);
  spec.dt = 1.0;
  spec.gamma = 1.0;
  return ReservoirBank({spec}, 1, ObservableSet::standard(2));
}

}  // namespace

TEST(Rollout, ConstantReadoutGivesConstantSequence) {
  auto bank = small_bank();
  TrainedReadout r;
  r.weights = RealVector::Zero(static_cast<Eigen::Index>(bank.width()));
  r.weights(r.weights.size() - 1) = 0.3;
  std::vector<double> primer(bank.width(), 0.0);
  primer.back() = 1.0;
  const auto out = autonomous_rollout(bank, r, primer, 20);
  ASSERT_EQ(out.predictions.size(), 20u);
  for (double p : out.predictions) EXPECT_DOUBLE_EQ(p, 0.3);
  EXPECT_EQ(out.clamp_events, 0u);
  EXPECT_TRUE(autonomous_rollout(bank, r, primer, 0).predictions.empty());
}

TEST(Rollout, ClampsOutOfRangeFeedback) {
  auto bank = small_bank();
  TrainedReadout r;
  r.weights = RealVector::Zero(static_cast<Eigen::Index>(bank.width()));
  r.weights(r.weights.size() - 1) = 1.7;
  std::vector<double> primer(bank.width(), 0.0);
  primer.back() = 1.0;
  const auto out = autonomous_rollout(bank, r, primer, 5);
  EXPECT_EQ(out.clamp_events, 4u);
}

TEST(Rollout, TeacherForcingReproducesOpenLoop) {
  const auto s = mackey_glass_series({}, 400, 0);
  auto bank = small_bank();
  const auto f = run_reservoir(bank, s);
  const auto r = train(f, RowRange{50, 300}, one_step_targets(s));
  const auto open = predict(r, f, RowRange{299, 399});
  // continue from the state after input 299
  bank.reset();
  run_reservoir(bank, std::span<const double>(s).first(300));
  std::vector<double> primer(f.values.cols());
  for (Eigen::Index c = 0; c < f.values.cols(); ++c) primer[c] = f.values(299, c);
  const auto forced = autonomous_rollout(bank, r, primer, 100, std::span<const double>(s).subspan(300));
  ASSERT_EQ(forced.predictions.size(), open.size());
  for (std::size_t k = 0; k < open.size(); ++k) EXPECT_NEAR(forced.predictions[k], open[k], 1e-12);
}

TEST(Tasks, NameRoundTrip) {
  for (auto k : {TaskKind::stm, TaskKind::narma, TaskKind::parity, TaskKind::mackey_glass})
    EXPECT_EQ(parse_task(task_name(k)), k);
  EXPECT_THROW(parse_task("XOR"), Error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "elastic/checkpoint.hpp"
#include "elastic/loss.hpp"
#include "elastic/optimizer.hpp"
#include "elastic/training.hpp"
#include "oracles.hpp"

using namespace elastic;

namespace {

Dataset synthetic(std::size_t n, FeatureShape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.shape = shape;
  d.classes = 10;
  d.pixels.resize(n * shape.size());
  for (auto& p : d.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % 10));
  return d;
}

ElasticNetwork small_net(std::uint64_t seed) {
  auto c = BackboneConfig::mini_densenet();
  c.input = {28, 28, 1};
  return make_elastic_network(c, {}, seed);
}

TrainConfig tiny_config(std::size_t e1, std::size_t e2) {
  TrainConfig t;
  t.phase1_epochs = e1;
  t.phase2_epochs = e2;
  t.batch_size = 8;
  t.seed = 3;
  return t;
}

}  // namespace

TEST(Loss, UniformPredictionGivesLogCOverC) {
  for (std::size_t c : {2u, 10u, 100u}) {
    const std::vector<double> p(c, 1.0 / static_cast<double>(c));
    EXPECT_NEAR(exit_loss(p, 0), std::log(static_cast<double>(c)) / static_cast<double>(c), 1e-9);
    EXPECT_NEAR(exit_loss(p, 0, false), std::log(static_cast<double>(c)), 1e-9);
  }
}

TEST(Loss, FloorClampsZeroProbability) {
  const std::vector<double> p{1.0, 0.0};
  bool clamped = false;
  const double l = exit_loss(p, 1, false, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_NEAR(l, -std::log(std::numeric_limits<double>::epsilon()), 1e-12);
  EXPECT_TRUE(std::isfinite(l));
}

TEST(Loss, SoftmaxIsShiftInvariant) {
  const std::vector<double> z{1.0, 2.0, 3.0}, zs{1001.0, 1002.0, 1003.0};
  const auto a = softmax(z), b = softmax(zs);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  EXPECT_NEAR(a[0] + a[1] + a[2], 1.0, 1e-15);
}

TEST(Loss, TotalWithUnitWeightsIsPlainSum) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> l(1 + trial % 13);
    double sum = 0;
    for (auto& v : l) sum += (v = d(rng));
    EXPECT_NEAR(total_loss(l, std::vector<double>(l.size(), 1.0)), sum, 1e-12);
  }
  const std::vector<double> a{1.0, 2.0}, w{1.0};
  EXPECT_THROW(total_loss(a, w), ContractViolation);
}

TEST(LossConfig, ValidateRejectsBadWeights) {
  EXPECT_THROW(LossConfig({{1.0, 1.0}}).validate(3), ConfigError);
  EXPECT_THROW(LossConfig({{-1.0, 1.0}}).validate(2), ConfigError);
  EXPECT_THROW(LossConfig({{0.0, 0.0}}).validate(2), ConfigError);
  EXPECT_NO_THROW(LossConfig({{0.0, 1.0}}).validate(2));
}

// Gradient of sum_i w_i L_i equals sum_i w_i dL_i, and a zero-weight exit
// sends exactly zero gradient into its head.
TEST(Composition, TotalGradientIsWeightedSumOfExitGradients) {
  auto net = small_net(5);
  const std::size_t n = net.exit_count();
  std::mt19937_64 rng(2);
  const auto x = oracle::random_tensor<double>({3, 28, 28, 1}, rng, 0.0, 1.0);
  const std::vector<int> labels{1, 4, 7};
  const std::vector<double> weights{0.0, 0.5, 1.5, 1.0};
  ASSERT_EQ(n, weights.size());

  RunOptions opt;
  opt.mode = Mode::train;
  auto dropout_rng = substream(1, "dropout");
  opt.dropout_rng = &dropout_rng;
  auto pass = run_network<double>(net, x, opt);
  std::vector<SlotId> losses;
  for (std::size_t e = 0; e < n; ++e) {
    losses.push_back(pass.tape.emplace<SoftmaxLogLossOp<double>>({pass.logits[e]}, labels, 0.1));
  }
  const SlotId total = pass.tape.emplace<WeightedSumOp<double>>(losses, weights);
  const auto g_total = pass.tape.backward(total, Tensor<double>::scalar(1.0));
  std::vector<GradientStore<double>> g_exit;
  for (auto l : losses) g_exit.push_back(pass.tape.backward(l, Tensor<double>::scalar(1.0)));

  const auto params = net.parameters();
  for (const auto& [index, slot] : pass.param_slots) {
    const Shape& s = params[index].param->shape;
    const auto gt = g_total.get_or_zero(slot, s);
    Tensor<double> expected(s);
    for (std::size_t e = 0; e < n; ++e) {
      const auto ge = g_exit[e].get_or_zero(slot, s);
      for (std::size_t i = 0; i < ge.size(); ++i) expected[i] += weights[e] * ge[i];
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      ASSERT_NEAR(gt[i], expected[i], 1e-12 * std::max(1.0, std::abs(expected[i])))
          << params[index].name;
    }
    if (params[index].name.rfind("exit@1/", 0) == 0) {
      for (double v : gt.data()) ASSERT_EQ(v, 0.0) << params[index].name;
    }
  }
}

TEST(Sgd, MomentumMatchesClosedForm) {
  Tensor<float> w({3}, 1.0f);
  const Tensor<float> g({3}, std::vector<float>{1.0f, -2.0f, 0.5f});
  OptimizerState<float> state;
  Tensor<float>* params[] = {&w};
  const Tensor<float>* grads[] = {&g};
  sgd_momentum_step<float>(params, grads, state, 0.1, 0.9);
  const Tensor<float> after1 = w;
  sgd_momentum_step<float>(params, grads, state, 0.1, 0.9);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(after1[i], 1.0 - 0.1 * g[i], 1e-6);
    EXPECT_NEAR(w[i] - after1[i], -1.9 * 0.1 * g[i], 1e-6);
  }
}

TEST(Sgd, NonFiniteGradientAbortsBeforeAnyUpdate) {
  Tensor<float> a({2}, 1.0f), b({2}, 1.0f);
  const Tensor<float> ga({2}, 1.0f);
  const Tensor<float> gb({2}, std::vector<float>{1.0f, std::numeric_limits<float>::quiet_NaN()});
  OptimizerState<float> state;
  Tensor<float>* params[] = {&a, &b};
  const Tensor<float>* grads[] = {&ga, &gb};
  EXPECT_THROW(sgd_momentum_step<float>(params, grads, state, 0.1, 0.9), NumericError);
  EXPECT_EQ(a[0], 1.0f);
  EXPECT_EQ(b[0], 1.0f);
}

TEST(Sgd, NullGradientLeavesParameterAlone) {
  Tensor<float> a({2}, 1.0f);
  OptimizerState<float> state;
  Tensor<float>* params[] = {&a};
  const Tensor<float>* grads[] = {nullptr};
  sgd_momentum_step<float>(params, grads, state, 0.1, 0.9);
  EXPECT_EQ(a[0], 1.0f);
}

TEST(Plateau, ReducesAfterPatienceStagnantObservations) {
  PlateauScheduler s(1e-3, 10, 10.0, 1e-4);
  EXPECT_FALSE(s.observe(1.0));
  for (int i = 0; i < 9; ++i) EXPECT_FALSE(s.observe(1.0));
  EXPECT_TRUE(s.observe(1.0));
  EXPECT_DOUBLE_EQ(s.lr(), 1e-4);
  EXPECT_EQ(s.wait(), 0u);
}

TEST(Plateau, ImprovementBelowDeltaDoesNotCount) {
  PlateauScheduler s(1.0, 2, 10.0, 0.1);
  s.observe(1.0);
  EXPECT_FALSE(s.observe(0.95));
  EXPECT_TRUE(s.observe(0.92));
  EXPECT_DOUBLE_EQ(s.lr(), 0.1);
  EXPECT_FALSE(s.observe(0.5));
  EXPECT_EQ(s.wait(), 0u);
  EXPECT_DOUBLE_EQ(s.best(), 0.5);
}

TEST(TrainConfig, ValidateRejectsNonsense) {
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.lr = -1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.factor = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Training, PhaseOneLeavesBackboneUntouched) {
  auto net = small_net(1);
  const auto train = synthetic(40, {28, 28, 1}, 1), val = synthetic(20, {28, 28, 1}, 2);
  const auto before = parameter_checksum(net, true);
  const auto heads_before = parameter_checksum(net, false);
  const auto log = train_phase1(net, train, val, tiny_config(2, 0), LossConfig::uniform(net.exit_count()));
  ASSERT_FALSE(log.halted) << log.diagnostic;
  ASSERT_EQ(log.records.size(), 2u);
  EXPECT_EQ(log.records[0].phase, 1);
  EXPECT_EQ(parameter_checksum(net, true), before);
  EXPECT_NE(parameter_checksum(net, false), heads_before);
}

TEST(Training, PhaseTwoDecaysAfterStagnantValidation) {
  auto net = small_net(1);
  const auto train = synthetic(16, {28, 28, 1}, 1), val = synthetic(10, {28, 28, 1}, 2);
  const std::size_t n = net.exit_count();
  ValidationHook hook = [n](ElasticNetwork&, std::size_t) {
    return Evaluation{std::vector<double>(n, 0.25), 1.0, std::vector<double>(n, 0.5)};
  };
  const auto log = train_phase2(net, train, val, tiny_config(0, 13), LossConfig::uniform(n), 10, hook);
  ASSERT_EQ(log.records.size(), 13u);
  for (std::size_t e = 0; e < 11; ++e) EXPECT_DOUBLE_EQ(log.records[e].lr, 1e-3) << e + 1;
  EXPECT_DOUBLE_EQ(log.records[11].lr, 1e-4);
  EXPECT_DOUBLE_EQ(log.records[12].lr, 1e-4);
  EXPECT_EQ(log.records.front().epoch, 11u);
  EXPECT_EQ(log.records.front().phase, 2);
}

TEST(Training, SameSeedIsBitwiseReproducible) {
  const auto train = synthetic(24, {28, 28, 1}, 1), val = synthetic(10, {28, 28, 1}, 2);
  std::uint32_t sums[2];
  for (int r = 0; r < 2; ++r) {
    auto net = small_net(9);
    const auto loss = LossConfig::uniform(net.exit_count());
    train_phase1(net, train, val, tiny_config(1, 1), loss);
    train_phase2(net, train, val, tiny_config(1, 1), loss, 1);
    sums[r] = parameter_checksum(net);
  }
  EXPECT_EQ(sums[0], sums[1]);
}

TEST(Training, EmptyTrainingSetIsConfigError) {
  auto net = small_net(1);
  Dataset empty;
  empty.shape = {28, 28, 1};
  EXPECT_THROW(train_phase1(net, empty, empty, tiny_config(1, 0), LossConfig::uniform(4)), ConfigError);
}

TEST(Training, DivergenceHaltsWithDiagnostic) {
  auto net = small_net(1);
  const auto train = synthetic(16, {28, 28, 1}, 1), val = synthetic(8, {28, 28, 1}, 2);
  auto cfg = tiny_config(0, 5);
  cfg.lr = 1e30;
  const auto log = train_phase2(net, train, val, cfg, LossConfig::uniform(net.exit_count()));
  EXPECT_TRUE(log.halted);
  EXPECT_FALSE(log.diagnostic.empty());
  EXPECT_LT(log.records.size(), 5u);
}

TEST(Evaluate, ErrorsAreFractionsPerExit) {
  auto net = small_net(2);
  const auto data = synthetic(30, {28, 28, 1}, 4);
  const auto err = evaluate(net, data);
  ASSERT_EQ(err.size(), net.exit_count());
  for (double e : err) {
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
    EXPECT_DOUBLE_EQ(e * 30, std::round(e * 30));
  }
  Dataset empty;
  empty.shape = {28, 28, 1};
  EXPECT_THROW(evaluate(net, empty), ContractViolation);
}

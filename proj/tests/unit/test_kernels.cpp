#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "elastic/kernels.hpp"
#include "elastic/layer.hpp"
#include "elastic/ops.hpp"
#include "gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace elastic;

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

TEST(PlanAxis, SamePaddingPutsOddElementAfter) {
  const auto p = plan_axis(5, 2, 2, Padding::same);
  EXPECT_EQ(p.out, 3u);
  EXPECT_EQ(p.pad_before, 0u);
  const auto q = plan_axis(4, 3, 1, Padding::same);
  EXPECT_EQ(q.out, 4u);
  EXPECT_EQ(q.pad_before, 1u);
  EXPECT_EQ(plan_axis(7, 3, 2, Padding::valid).out, 3u);
  EXPECT_THROW(plan_axis(2, 3, 1, Padding::valid), ShapeError);
  EXPECT_THROW(plan_axis(4, 3, 0, Padding::same), ContractViolation);
}

TEST(Conv2d, MatchesNaiveLoopsExactly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = pick(rng, 1, 3), s = pick(rng, 1, 2);
    const Padding p = pick(rng, 0, 1) ? Padding::same : Padding::valid;
    const std::size_t h = pick(rng, k, 8), w = pick(rng, k, 8), c = pick(rng, 1, 4), f = pick(rng, 1, 4);
    const auto x = oracle::random_tensor<float>({pick(rng, 1, 2), h, w, c}, rng);
    const auto kern = oracle::random_tensor<float>({k, k, c, f}, rng);
    const auto bias = oracle::random_tensor<float>({f}, rng);
    const bool with_bias = trial % 2;
    const auto got = kernels::conv2d(x, kern, with_bias ? &bias : nullptr, s, p);
    const auto want = oracle::conv2d(x, kern, with_bias ? &bias : nullptr, s, p);
    ASSERT_TRUE(got == want) << "trial " << trial;
  }
}

TEST(DepthwiseConv2d, MatchesNaiveLoopsExactly) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = pick(rng, 1, 3), s = pick(rng, 1, 2);
    const Padding p = pick(rng, 0, 1) ? Padding::same : Padding::valid;
    const std::size_t h = pick(rng, k, 8), w = pick(rng, k, 8), c = pick(rng, 1, 4);
    const auto x = oracle::random_tensor<float>({pick(rng, 1, 2), h, w, c}, rng);
    const auto kern = oracle::random_tensor<float>({k, k, c}, rng);
    const auto bias = oracle::random_tensor<float>({c}, rng);
    const bool with_bias = trial % 2;
    const auto got = kernels::depthwise_conv2d(x, kern, with_bias ? &bias : nullptr, s, p);
    const auto want = oracle::depthwise(x, kern, with_bias ? &bias : nullptr, s, p);
    ASSERT_TRUE(got == want) << "trial " << trial;
  }
}

TEST(Dense, MatchesNaiveLoopsExactly) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::random_tensor<float>({pick(rng, 1, 4), pick(rng, 1, 9)}, rng);
    const auto w = oracle::random_tensor<float>({x.dim(1), pick(rng, 1, 7)}, rng);
    const auto b = oracle::random_tensor<float>({w.dim(1)}, rng);
    ASSERT_TRUE(kernels::dense(x, w, &b) == oracle::dense(x, w, &b));
  }
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  const Tensor<float> x({1, 4, 4, 3}), w({3, 3, 2, 1});
  EXPECT_THROW(kernels::conv2d<float>(x, w, nullptr, 1, Padding::same), ShapeError);
}

TEST(MaxPool, TiesGoToFirstPosition) {
  Tensor<float> x({1, 2, 2, 1}, 1.0f);
  std::vector<std::size_t> argmax;
  const auto y = kernels::max_pool2d(x, 2, 2, Padding::valid, &argmax);
  EXPECT_EQ(y[0], 1.0f);
  ASSERT_EQ(argmax.size(), 1u);
  EXPECT_EQ(argmax[0], 0u);
}

TEST(MaxPool, PaddingNeverWins) {
  Tensor<float> x({1, 3, 3, 1}, -5.0f);
  std::vector<std::size_t> argmax;
  const auto y = kernels::max_pool2d(x, 2, 2, Padding::same, &argmax);
  for (float v : y.data()) EXPECT_EQ(v, -5.0f);
}

TEST(AvgPool, AveragesInBoundsOnly) {
  Tensor<float> x({1, 3, 3, 1}, 2.0f);
  const auto y = kernels::avg_pool2d(x, 2, 2, Padding::same);
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 2.0f);
}

TEST(GlobalAvgPool, HandExample) {
  Tensor<float> x({1, 2, 2, 2}, std::vector<float>{1, 10, 2, 20, 3, 30, 4, 40});
  const auto y = kernels::global_avg_pool(x);
  EXPECT_FLOAT_EQ(y[0], 2.5f);
  EXPECT_FLOAT_EQ(y[1], 25.0f);
}

TEST(BatchNorm, IdentityStatisticsGiveScaledInput) {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_tensor<double>({2, 3, 3, 2}, rng);
  const std::vector<double> gamma{1, 1}, beta{0, 0}, mean{0, 0}, var{1, 1};
  const auto y = kernels::batch_norm<double>(x, gamma, beta, mean, var, 1e-3);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1.001), 1e-15);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  std::mt19937_64 rng(5);
  auto x = oracle::random_tensor<double>({4, 3, 3, 2}, rng, -4.0, 9.0);
  std::vector<double> mean, var;
  kernels::channel_moments(x, mean, var);
  const std::vector<double> gamma{1, 1}, beta{0, 0};
  const auto y = kernels::batch_norm<double>(x, gamma, beta, mean, var, 0.0);
  std::vector<double> m2, v2;
  kernels::channel_moments(y, m2, v2);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(m2[c], 0.0, 1e-12);
    EXPECT_NEAR(v2[c], 1.0, 1e-12);
  }
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(6);
  auto z = oracle::random_tensor<double>({5, 7}, rng, -50.0, 50.0);
  const auto p = kernels::softmax_rows(z);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += p.at({r, c});
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  for (auto& v : z.data()) v += 1000.0;
  const auto q = kernels::softmax_rows(z);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
}

TEST(Dropout, RejectsRateOutsideRange) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(DropoutOp<float>(1.0, {4}, rng), ContractViolation);
  EXPECT_THROW(DropoutOp<float>(-0.1, {4}, rng), ContractViolation);
}

TEST(Dropout, MaskIsZeroOrInverseKeep) {
  std::mt19937_64 rng(1);
  DropoutOp<double> op(0.25, {1000}, rng);
  std::size_t kept = 0;
  for (double m : op.mask().data()) {
    ASSERT_TRUE(m == 0.0 || std::abs(m - 1.0 / 0.75) < 1e-12);
    kept += m != 0.0;
  }
  EXPECT_NEAR(kept / 1000.0, 0.75, 0.06);
}

TEST(LayerCounts, FormulaMatchesEnumeration) {
  const FeatureShape in{8, 8, 3};
  const std::vector<LayerSpec> layers{LayerSpec::conv(5, 3, 1, true), LayerSpec::conv(5, 1),
                                      LayerSpec::depthwise(3, 2, true), LayerSpec::depthwise(3),
                                      LayerSpec::batch_norm(), LayerSpec::relu(),
                                      LayerSpec::max_pool(), LayerSpec::avg_pool()};
  for (const auto& l : layers) {
    const auto specs = parameter_specs(l, std::span<const FeatureShape>(&in, 1));
    std::uint64_t n = 0;
    for (const auto& s : specs) n += shape_size(s.shape);
    EXPECT_EQ(n, parameter_count(l, std::span<const FeatureShape>(&in, 1))) << to_string(l.kind);
  }
  EXPECT_EQ(parameter_count(LayerSpec::conv(5, 3, 1, true), std::span<const FeatureShape>(&in, 1)),
            3u * 3 * 3 * 5 + 5);
  EXPECT_EQ(head_parameter_count(64, 10), 650u);
  EXPECT_EQ(head_flop_count(64, 10), 64u + 2 * 64 * 10 + 10);
}

class GradCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradCheck, TwentyRandomShapesWithinTolerance) {
  const auto family = gradsuite::families().at(GetParam());
  const auto r = gradsuite::run_family(family, 20, 100 + GetParam());
  EXPECT_EQ(r.cases, 20u);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.worst, 1e-5) << family.name << " worst case " << r.worst_case;
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradCheck,
                         ::testing::Range<std::size_t>(0, gradsuite::families().size()),
                         [](const auto& info) { return gradsuite::families()[info.param].name; });

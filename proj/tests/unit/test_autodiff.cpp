#include <gtest/gtest.h>

#include <random>

#include "elastic/autodiff.hpp"
#include "elastic/ops.hpp"
#include "oracles.hpp"

using namespace elastic;

TEST(Tensor, RejectsEmptyShapeAndZeroExtent) {
  EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  Tensor<int> t({2, 3});
  for (std::size_t i = 0; i < 6; ++i) t[i] = static_cast<int>(i);
  EXPECT_EQ(t.at({1, 0}), 3);
  EXPECT_EQ(t.at({0, 2}), 2);
  EXPECT_THROW(t.at({2, 0}), ShapeError);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).at({2, 1}), 5);
}

TEST(Tape, SquareGradientAtThree) {
  Tape<double> tape;
  const SlotId x = tape.leaf(Tensor<double>::scalar(3.0), true);
  const SlotId y = tape.emplace<MulOp<double>>({x, x});
  EXPECT_DOUBLE_EQ(tape.value(y)[0], 9.0);
  const auto g = tape.backward(y, Tensor<double>::scalar(1.0));
  EXPECT_DOUBLE_EQ(g.at(x)[0], 6.0);
}

TEST(Tape, FanOutAccumulates) {
  Tape<double> tape;
  const SlotId x = tape.leaf(Tensor<double>::scalar(5.0), true);
  const SlotId a = tape.emplace<IdentityOp<double>>({x});
  const SlotId b = tape.emplace<IdentityOp<double>>({x});
  const SlotId y = tape.emplace<AddOp<double>>({a, b});
  const auto g = tape.backward(y, Tensor<double>::scalar(1.0));
  EXPECT_DOUBLE_EQ(g.at(x)[0], 2.0);
}

TEST(Tape, ZeroWeightBranchGetsExactZero) {
  Tape<double> tape;
  const SlotId a = tape.leaf(Tensor<double>::scalar(1.5), true);
  const SlotId b = tape.leaf(Tensor<double>::scalar(-2.0), true);
  const SlotId y = tape.emplace<WeightedSumOp<double>>({a, b}, std::vector<double>{1.0, 0.0});
  const auto g = tape.backward(y, Tensor<double>::scalar(1.0));
  EXPECT_EQ(g.get_or_zero(b, {1})[0], 0.0);
  EXPECT_DOUBLE_EQ(g.at(a)[0], 1.0);
}

TEST(Tape, SeedShapeMismatchIsContractViolation) {
  Tape<double> tape;
  const SlotId x = tape.leaf(Tensor<double>({2, 2}), true);
  const SlotId y = tape.emplace<ReluOp<double>>({x});
  EXPECT_THROW(tape.backward(y, Tensor<double>({4})), ContractViolation);
}

TEST(Tape, UnknownSlotThrows) {
  Tape<double> tape;
  tape.leaf(Tensor<double>::scalar(1.0), true);
  EXPECT_THROW(tape.value(7), UnknownSlotError);
  EXPECT_THROW(tape.backward(7, Tensor<double>::scalar(1.0)), UnknownSlotError);
  EXPECT_THROW(tape.emplace<ReluOp<double>>({3}), UnknownSlotError);
}

TEST(Tape, NoGradientForConstantLeaf) {
  Tape<double> tape;
  const SlotId x = tape.leaf(Tensor<double>::scalar(2.0), false);
  const SlotId w = tape.leaf(Tensor<double>::scalar(3.0), true);
  const SlotId y = tape.emplace<MulOp<double>>({x, w});
  const auto g = tape.backward(y, Tensor<double>::scalar(1.0));
  EXPECT_FALSE(g.has(x));
  EXPECT_DOUBLE_EQ(g.at(w)[0], 2.0);
}

TEST(Tape, ReplayIsBitwiseIdentical) {
  std::mt19937_64 rng(4);
  Tape<float> tape;
  const SlotId x = tape.leaf(oracle::random_tensor<float>({2, 5, 5, 3}, rng), true);
  const SlotId w = tape.leaf(oracle::random_tensor<float>({3, 3, 3, 4}, rng), true);
  const SlotId c = tape.emplace<Conv2dOp<float>>({x, w}, 2, Padding::same);
  const SlotId r = tape.emplace<ReluOp<float>>({c});
  tape.emplace<MaxPoolOp<float>>({r}, 2, 2, Padding::same);
  EXPECT_TRUE(tape.replay_matches());
}

TEST(Tape, BackwardIsLinearInSeed) {
  std::mt19937_64 rng(9);
  Tape<double> tape;
  const SlotId x = tape.leaf(oracle::random_tensor<double>({3, 4}, rng), true);
  const SlotId w = tape.leaf(oracle::random_tensor<double>({4, 2}, rng), true);
  const SlotId y = tape.emplace<DenseOp<double>>({x, w});
  const auto s1 = oracle::random_tensor<double>({3, 2}, rng);
  const auto s2 = oracle::random_tensor<double>({3, 2}, rng);
  Tensor<double> sum = s1;
  accumulate(sum, s2);
  const auto g1 = tape.backward(y, s1), g2 = tape.backward(y, s2), g12 = tape.backward(y, sum);
  const auto& a = g1.at(w), &b = g2.at(w), &c = g12.at(w);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], a[i] + b[i], 1e-12);
}

TEST(Tape, NonFiniteOutputRaisesNumericError) {
  Tape<double> tape;
  const SlotId x = tape.leaf(Tensor<double>::scalar(1e308), true);
  EXPECT_THROW(tape.emplace<AddOp<double>>({x, x}), NumericError);
}

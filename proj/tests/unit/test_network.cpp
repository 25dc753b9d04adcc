#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "elastic/budget.hpp"
#include "elastic/network.hpp"
#include "oracles.hpp"

using namespace elastic;

namespace {

Tensor<float> sample_batch(std::size_t n, FeatureShape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_tensor<float>({n, s.height, s.width, s.channels}, rng, 0.0, 1.0);
}

BackboneConfig resnet17() {
  auto c = BackboneConfig::mini_resnet();
  c.final_feature_anchor = true;
  return c;
}

}  // namespace

TEST(Elasticize, OneHeadPerAnchorWithGlorotRange) {
  const auto net = make_elastic_network(BackboneConfig::mini_mobilenet(), HeadConfig{10, 0.2}, 1);
  ASSERT_EQ(net.exit_count(), 13u);
  for (std::size_t i = 1; i <= net.exit_count(); ++i) {
    const auto& e = net.exit(i);
    EXPECT_EQ(e.anchor, i);
    EXPECT_EQ(e.parameter_count(), e.features * 10 + 10);
    const double limit = std::sqrt(6.0 / static_cast<double>(e.features + 10));
    for (float v : e.kernel.value->data()) EXPECT_LE(std::abs(v), limit);
    for (float v : e.bias.value->data()) EXPECT_EQ(v, 0.0f);
  }
  EXPECT_THROW(net.exit(0), ContractViolation);
  EXPECT_THROW(net.exit(14), ContractViolation);
}

TEST(Elasticize, ShapeOnlyBackboneGetsShapeOnlyHeads) {
  auto rng = substream(0, "init");
  const auto net = elasticize(build_full_audit_graph("densenet-169"), HeadConfig{100, 0.2}, rng);
  EXPECT_EQ(net.exit_count(), 4u);
  EXPECT_FALSE(net.exit(1).kernel.value.has_value());
  EXPECT_EQ(net.exit(4).parameter_count(), 1664u * 100 + 100);
}

TEST(Elasticize, SameSeedSameWeights) {
  auto a = make_elastic_network(BackboneConfig::mini_densenet(), {}, 7);
  auto b = make_elastic_network(BackboneConfig::mini_densenet(), {}, 7);
  auto c = make_elastic_network(BackboneConfig::mini_densenet(), {}, 8);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(*pa[i].param->value == *pb[i].param->value);
    any_diff |= !(*pa[i].param->value == *pc[i].param->value);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Prune, KeepsRequestedExitsPlusFinal) {
  auto net = make_elastic_network(resnet17(), {}, 3);
  ASSERT_EQ(net.exit_count(), 17u);
  const auto pruned = prune_exits(net, {2, 6, 9, 12});
  ASSERT_EQ(pruned.exit_count(), 5u);
  const std::vector<std::size_t> anchors{2, 6, 9, 12, 17};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(pruned.exit(i + 1).anchor, anchors[i]);
  EXPECT_THROW(prune_exits(net, {17}), ContractViolation);
  EXPECT_THROW(prune_exits(net, {0}), ContractViolation);
  EXPECT_EQ(prune_exits(net, {}).exit_count(), 1u);
}

TEST(Prune, RetainedExitOutputsAreBitwiseUnchanged) {
  auto net = make_elastic_network(resnet17(), {}, 3);
  auto pruned = prune_exits(net, {2, 6, 9, 12});
  const auto x = sample_batch(3, net.backbone().input_shape(), 5);
  const auto full = forward_all_exits(net, x);
  const auto kept = forward_all_exits(pruned, x);
  const std::vector<std::size_t> anchors{2, 6, 9, 12, 17};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(kept[i] == full[anchors[i] - 1]) << "exit " << i + 1;
}

TEST(Forward, ProbabilitiesSumToOne) {
  auto net = make_elastic_network(BackboneConfig::mini_vgg(), {}, 2);
  const auto probs = forward_all_exits(net, sample_batch(4, net.backbone().input_shape(), 1));
  ASSERT_EQ(probs.size(), 5u);
  for (const auto& p : probs) {
    ASSERT_EQ(p.shape(), (Shape{4, 10}));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 10; ++c) s += p.at({r, c});
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(Forward, SingleExitRunMatchesSharedTrunkRun) {
  auto net = make_elastic_network(BackboneConfig::mini_mobilenet(), {}, 4);
  const auto x = sample_batch(2, net.backbone().input_shape(), 2);
  const auto all = forward_all_exits(net, x);
  for (std::size_t e : {1u, 5u, 13u}) {
    RunOptions opt;
    opt.exits = {e};
    auto pass = run_network<float>(net, x, opt);
    const auto p = kernels::softmax_rows(pass.tape.value(pass.logits[e - 1]));
    EXPECT_TRUE(p == all[e - 1]) << "exit " << e;
  }
}

TEST(Forward, EvalModeIsDeterministic) {
  auto net = make_elastic_network(BackboneConfig::mini_densenet(), {}, 4);
  const auto x = sample_batch(2, net.backbone().input_shape(), 2);
  const auto a = forward_all_exits(net, x), b = forward_all_exits(net, x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i] == b[i]);
}

TEST(Predict, EvaluatesOnlyThePrefix) {
  auto net = make_elastic_network(BackboneConfig::mini_mobilenet(), {}, 6);
  const auto shape = net.backbone().input_shape();
  const auto x = sample_batch(1, shape, 3).reshaped({shape.height, shape.width, shape.channels});
  for (std::size_t e = 1; e <= net.exit_count(); ++e) {
    const NodeId anchor = net.exit(e).node;
    const auto mask = net.backbone().ancestors(anchor);
    std::vector<NodeId> visited;
    const auto pred = predict(net, x, e, [&](NodeId n) { visited.push_back(n); });
    for (NodeId n : visited) {
      EXPECT_LE(n, anchor);
      EXPECT_TRUE(mask[n]);
    }
    // the input node is fed, not executed
    std::size_t expected = 0;
    for (std::size_t n = 1; n < mask.size(); ++n) expected += mask[n];
    EXPECT_EQ(visited.size(), expected);
    EXPECT_EQ(pred.probabilities.size(), 10u);
    EXPECT_EQ(pred.label, argmax(pred.probabilities));
  }
  EXPECT_THROW(predict(net, x, 14), ContractViolation);
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<float> v{0.1f, 0.4f, 0.4f, 0.1f};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(Substream, NamedStreamsDiffer) {
  auto a = substream(1, "init"), b = substream(1, "shuffle/phase1"), c = substream(1, "init");
  const auto va = a(), vb = b(), vc = c();
  EXPECT_NE(va, vb);
  EXPECT_EQ(va, vc);
}

TEST(Parameters, NamesAreUniqueAndHeadsLast) {
  auto net = make_elastic_network(BackboneConfig::mini_resnet(), {}, 1);
  const auto params = net.parameters();
  std::set<std::string> names;
  bool seen_head = false;
  for (const auto& p : params) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    if (p.in_head) seen_head = true;
    else EXPECT_FALSE(seen_head) << p.name;
  }
  EXPECT_EQ(params.back().name, "exit@16/bias");
}

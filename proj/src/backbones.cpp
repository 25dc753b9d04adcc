#include "elastic/backbones.hpp"

#include <cmath>
#include <string>

namespace elastic {
namespace {

void check_mini_input(const BackboneConfig& c) {
  const auto& in = c.input;
  const bool cifar_like = in.height == 32 && in.width == 32 && in.channels >= 1;
  const bool mnist_like = in.height == 28 && in.width == 28 && in.channels == 1;
  if (!cifar_like && !mnist_like) {
    throw ConfigError("mini backbones take 32x32xC or 28x28x1 inputs");
  }
}

bool allocate(const BackboneConfig& c) { return c.scale == Scale::mini; }

std::string indexed(const std::string& prefix, std::size_t i) { return prefix + std::to_string(i); }

// conv -> batch norm -> relu, returning the relu node.
NodeId conv_bn_relu(NetworkGraph& g, const std::string& name, NodeId x, std::size_t filters,
                    std::size_t kernel, std::size_t stride) {
  x = g.add(name + "_conv", LayerSpec::conv(filters, kernel, stride, false), {x});
  x = g.add(name + "_bn", LayerSpec::batch_norm(), {x});
  return g.add(name + "_relu", LayerSpec::relu(), {x});
}

NodeId stem(NetworkGraph& g, const BackboneConfig& c) {
  NodeId x = conv_bn_relu(g, "stem", g.input(), c.stem_channels, c.stem_kernel, c.stem_stride);
  if (c.stem_max_pool) x = g.add("stem_pool", LayerSpec::max_pool(3, 2, Padding::same), {x});
  return x;
}

NetworkGraph build_vgg(const BackboneConfig& c) {
  if (c.stage_convs.size() < 2) throw ConfigError("vgg needs at least 2 stages");
  if (c.stage_channels.size() != c.stage_convs.size()) {
    throw ConfigError("vgg stage_convs and stage_channels differ in length");
  }
  NetworkGraph g(c.effective_input(), allocate(c));
  NodeId x = g.input();
  for (std::size_t s = 0; s < c.stage_convs.size(); ++s) {
    if (c.stage_convs[s] == 0) throw ConfigError("vgg stage without convolutions");
    for (std::size_t j = 0; j < c.stage_convs[s]; ++j) {
      const std::string name = "block" + std::to_string(s + 1) + "_conv" + std::to_string(j + 1);
      x = g.add(name, LayerSpec::conv(c.stage_channels[s], 3, 1, true), {x});
      x = g.add(name + "_relu", LayerSpec::relu(), {x});
    }
    x = g.add(indexed("block", s + 1) + "_pool", LayerSpec::max_pool(2, 2, Padding::same), {x});
    g.mark_anchor(x, AnchorKind::max_pool);
  }
  g.set_final_feature(x);
  g.validate();
  return g;
}

std::size_t scaled_width(std::size_t channels, double alpha) {
  const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(channels) * alpha));
  return w < 1 ? 1 : w;
}

NetworkGraph build_mobilenet(const BackboneConfig& c) {
  if (!(c.alpha > 0.0) || !(c.rho > 0.0)) throw ConfigError("mobilenet multipliers must be positive");
  if (c.block_channels.empty()) throw ConfigError("mobilenet needs at least one block");
  if (c.block_strides.size() != c.block_channels.size()) {
    throw ConfigError("mobilenet block_channels and block_strides differ in length");
  }
  NetworkGraph g(c.effective_input(), allocate(c));
  NodeId x = conv_bn_relu(g, "stem", g.input(), scaled_width(c.stem_channels, c.alpha),
                          c.stem_kernel, c.stem_stride);
  for (std::size_t b = 0; b < c.block_channels.size(); ++b) {
    const std::string name = indexed("dw_block", b + 1);
    x = g.add(name + "_dw", LayerSpec::depthwise(3, c.block_strides[b], false), {x});
    x = g.add(name + "_dw_bn", LayerSpec::batch_norm(), {x});
    x = g.add(name + "_dw_relu", LayerSpec::relu(), {x});
    x = conv_bn_relu(g, name + "_pw", x, scaled_width(c.block_channels[b], c.alpha), 1, 1);
    g.mark_anchor(x, AnchorKind::depthwise_block_relu);
  }
  g.set_final_feature(x);
  g.validate();
  return g;
}

NetworkGraph build_densenet(const BackboneConfig& c) {
  if (c.growth_rate < 1) throw ConfigError("densenet growth rate must be >= 1");
  if (c.dense_layers.size() < 2) throw ConfigError("densenet needs at least 2 dense blocks");
  if (!(c.compression > 0.0 && c.compression <= 1.0)) {
    throw ConfigError("densenet compression must lie in (0, 1]");
  }
  NetworkGraph g(c.effective_input(), allocate(c));
  NodeId x = stem(g, c);
  // Full-size transitions pool even extents; mini ones may see odd ones.
  const Padding pool_padding = c.scale == Scale::mini ? Padding::same : Padding::valid;
  for (std::size_t b = 0; b < c.dense_layers.size(); ++b) {
    for (std::size_t l = 0; l < c.dense_layers[b]; ++l) {
      const std::string name = "conv" + std::to_string(b + 2) + "_block" + std::to_string(l + 1);
      NodeId y = g.add(name + "_bn0", LayerSpec::batch_norm(), {x});
      y = g.add(name + "_relu0", LayerSpec::relu(), {y});
      if (c.bottleneck) {
        y = g.add(name + "_conv1", LayerSpec::conv(4 * c.growth_rate, 1, 1, false), {y});
        y = g.add(name + "_bn1", LayerSpec::batch_norm(), {y});
        y = g.add(name + "_relu1", LayerSpec::relu(), {y});
      }
      y = g.add(name + "_conv2", LayerSpec::conv(c.growth_rate, 3, 1, false), {y});
      x = g.add(name + "_concat", LayerSpec::concat(), {x, y});
    }
    if (b + 1 == c.dense_layers.size()) break;
    const std::string name = indexed("pool", b + 2);
    const std::size_t channels = g.node(x).shape.channels;
    const auto reduced = static_cast<std::size_t>(
        std::floor(static_cast<double>(channels) * c.compression));
    x = g.add(name + "_bn", LayerSpec::batch_norm(), {x});
    x = g.add(name + "_relu", LayerSpec::relu(), {x});
    x = g.add(name + "_conv", LayerSpec::conv(reduced < 1 ? 1 : reduced, 1, 1, false), {x});
    x = g.add(name + "_pool", LayerSpec::avg_pool(2, 2, pool_padding), {x});
    g.mark_anchor(x, AnchorKind::transition_avg_pool);
  }
  x = g.add("final_bn", LayerSpec::batch_norm(), {x});
  x = g.add("final_relu", LayerSpec::relu(), {x});
  g.mark_anchor(x, AnchorKind::final_feature);
  g.set_final_feature(x);
  g.validate();
  return g;
}

NetworkGraph build_resnet(const BackboneConfig& c) {
  if (c.stage_blocks.empty()) throw ConfigError("resnet needs at least one stage");
  if (c.stage_channels.size() != c.stage_blocks.size()) {
    throw ConfigError("resnet stage_blocks and stage_channels differ in length");
  }
  if (c.bottleneck_ratio < 1) throw ConfigError("resnet bottleneck ratio must be >= 1");
  NetworkGraph g(c.effective_input(), allocate(c));
  NodeId x = stem(g, c);
  for (std::size_t s = 0; s < c.stage_blocks.size(); ++s) {
    if (c.stage_blocks[s] == 0) throw ConfigError("resnet stage without residual blocks");
    const std::size_t out = c.stage_channels[s];
    const std::size_t width = std::max<std::size_t>(1, out / c.bottleneck_ratio);
    for (std::size_t b = 0; b < c.stage_blocks[s]; ++b) {
      const std::string name = "conv" + std::to_string(s + 2) + "_block" + std::to_string(b + 1);
      const std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
      const bool project = b == 0;  // conv_block; the rest are identity blocks
      NodeId y = conv_bn_relu(g, name + "_1", x, width, 1, stride);
      y = conv_bn_relu(g, name + "_2", y, width, 3, 1);
      y = g.add(name + "_3_conv", LayerSpec::conv(out, 1, 1, false), {y});
      y = g.add(name + "_3_bn", LayerSpec::batch_norm(), {y});
      NodeId shortcut = x;
      if (project) {
        shortcut = g.add(name + "_0_conv", LayerSpec::conv(out, 1, stride, false), {x});
        shortcut = g.add(name + "_0_bn", LayerSpec::batch_norm(), {shortcut});
      }
      const NodeId sum = g.add(name + "_add", LayerSpec::add(), {shortcut, y});
      g.mark_anchor(sum, AnchorKind::residual_add);
      x = g.add(name + "_out", LayerSpec::relu(), {sum});
    }
  }
  if (c.final_feature_anchor) g.mark_anchor(x, AnchorKind::final_feature);
  g.set_final_feature(x);
  g.validate();
  return g;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::vgg: return "vgg";
    case Family::mobilenet: return "mobilenet";
    case Family::densenet: return "densenet";
    case Family::resnet: return "resnet";
    case Family::concat_standin: return "concat-standin";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  for (Family f : {Family::vgg, Family::mobilenet, Family::densenet, Family::resnet,
                   Family::concat_standin}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown backbone family '" + std::string(name) + "'");
}

BackboneConfig BackboneConfig::mini_vgg() {
  BackboneConfig c;
  c.name = "mini-vgg";
  c.family = Family::vgg;
  c.stage_convs = {1, 1, 2, 2, 2};
  c.stage_channels = {8, 16, 32, 32, 64};
  return c;
}

BackboneConfig BackboneConfig::mini_mobilenet() {
  BackboneConfig c;
  c.name = "mini-mobilenet";
  c.family = Family::mobilenet;
  c.stem_channels = 8;
  c.stem_stride = 1;
  c.block_channels = {8, 16, 16, 32, 32, 64, 64, 64, 64, 64, 64, 128, 128};
  c.block_strides = {1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1};
  return c;
}

BackboneConfig BackboneConfig::mini_densenet() {
  BackboneConfig c;
  c.name = "mini-densenet";
  c.family = Family::densenet;
  c.stem_channels = 16;
  c.stem_stride = 2;
  c.growth_rate = 8;
  c.dense_layers = {2, 2, 2, 2};
  c.bottleneck = false;
  return c;
}

BackboneConfig BackboneConfig::mini_resnet() {
  BackboneConfig c;
  c.name = "mini-resnet";
  c.family = Family::resnet;
  c.stem_channels = 8;
  c.stage_blocks = {3, 4, 6, 3};
  c.stage_channels = {16, 32, 64, 128};
  return c;
}

BackboneConfig BackboneConfig::concat_standin(std::size_t blocks) {
  BackboneConfig c;
  c.name = "concat-standin";
  c.family = Family::concat_standin;
  c.concat_blocks = blocks;
  return c;
}

BackboneConfig BackboneConfig::full_audit(std::string_view name) {
  BackboneConfig c;
  c.name = std::string(name);
  c.scale = Scale::full_audit;
  c.input = {224, 224, 3};
  if (name == "densenet-121" || name == "densenet-169") {
    c.family = Family::densenet;
    c.stem_channels = 64;
    c.stem_kernel = 7;
    c.stem_stride = 2;
    c.stem_max_pool = true;
    c.growth_rate = 32;
    c.bottleneck = true;
    c.dense_layers = name == "densenet-121" ? std::vector<std::size_t>{6, 12, 24, 16}
                                            : std::vector<std::size_t>{6, 12, 32, 32};
    return c;
  }
  if (name == "mobilenet") {
    c.family = Family::mobilenet;
    c.stem_channels = 32;
    c.stem_stride = 2;
    c.block_channels = {64, 128, 128, 256, 256, 512, 512, 512, 512, 512, 512, 1024, 1024};
    c.block_strides = {1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1};
    return c;
  }
  throw ConfigError("unknown full-audit backbone '" + std::string(name) +
                    "' (known: densenet-121, densenet-169, mobilenet)");
}

std::vector<std::string> BackboneConfig::known_names() {
  return {"mini-vgg",     "mini-mobilenet", "mini-densenet", "mini-resnet",
          "concat-standin", "densenet-121", "densenet-169",  "mobilenet"};
}

BackboneConfig BackboneConfig::by_name(std::string_view name) {
  if (name == "mini-vgg") return mini_vgg();
  if (name == "mini-mobilenet") return mini_mobilenet();
  if (name == "mini-densenet") return mini_densenet();
  if (name == "mini-resnet") return mini_resnet();
  if (name == "concat-standin") return concat_standin();
  if (name == "densenet-121" || name == "densenet-169" || name == "mobilenet") {
    return full_audit(name);
  }
  std::string known;
  for (const auto& n : known_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown backbone '" + std::string(name) + "' (known: " + known + ")");
}

FeatureShape BackboneConfig::effective_input() const {
  if (family != Family::mobilenet || rho == 1.0) return input;
  const auto scale_extent = [this](std::size_t e) {
    const auto r = static_cast<std::size_t>(std::lround(static_cast<double>(e) * rho));
    return r < 1 ? std::size_t{1} : r;
  };
  return FeatureShape{scale_extent(input.height), scale_extent(input.width), input.channels};
}

NetworkGraph build_mini_vgg(const BackboneConfig& config) {
  if (config.family != Family::vgg) throw ConfigError("build_mini_vgg needs a vgg config");
  check_mini_input(config);
  return build_vgg(config);
}

NetworkGraph build_mini_mobilenet(const BackboneConfig& config) {
  if (config.family != Family::mobilenet) {
    throw ConfigError("build_mini_mobilenet needs a mobilenet config");
  }
  check_mini_input(config);
  return build_mobilenet(config);
}

NetworkGraph build_mini_densenet(const BackboneConfig& config) {
  if (config.family != Family::densenet) {
    throw ConfigError("build_mini_densenet needs a densenet config");
  }
  check_mini_input(config);
  return build_densenet(config);
}

NetworkGraph build_mini_resnet(const BackboneConfig& config) {
  if (config.family != Family::resnet) throw ConfigError("build_mini_resnet needs a resnet config");
  check_mini_input(config);
  return build_resnet(config);
}

NetworkGraph build_concat_standin(const BackboneConfig& config) {
  if (config.concat_blocks < 1) throw ConfigError("concat stand-in needs at least one block");
  NetworkGraph g(config.effective_input(), allocate(config));
  NodeId x = g.add("stem_conv", LayerSpec::conv(config.stem_channels, 3, 1, true), {g.input()});
  x = g.add("stem_relu", LayerSpec::relu(), {x});
  for (std::size_t b = 0; b < config.concat_blocks; ++b) {
    const std::string name = indexed("mixed", b);
    NodeId one = g.add(name + "_1x1", LayerSpec::conv(4, 1, 1, true), {x});
    one = g.add(name + "_1x1_relu", LayerSpec::relu(), {one});
    NodeId three = g.add(name + "_3x3", LayerSpec::conv(4, 3, 1, true), {x});
    three = g.add(name + "_3x3_relu", LayerSpec::relu(), {three});
    x = g.add(name + "_concat", LayerSpec::concat(), {one, three});
    const bool last = b + 1 == config.concat_blocks;
    g.mark_anchor(x, last ? AnchorKind::final_feature : AnchorKind::block_concat);
  }
  g.set_final_feature(x);
  g.validate();
  return g;
}

NetworkGraph build_full_audit_graph(std::string_view name) {
  const BackboneConfig c = BackboneConfig::full_audit(name);
  return c.family == Family::densenet ? build_densenet(c) : build_mobilenet(c);
}

NetworkGraph build_backbone(const BackboneConfig& config) {
  if (config.scale == Scale::full_audit) {
    switch (config.family) {
      case Family::densenet: return build_densenet(config);
      case Family::mobilenet: return build_mobilenet(config);
      case Family::vgg: return build_vgg(config);
      case Family::resnet: return build_resnet(config);
      case Family::concat_standin: return build_concat_standin(config);
    }
  }
  switch (config.family) {
    case Family::vgg: return build_mini_vgg(config);
    case Family::mobilenet: return build_mini_mobilenet(config);
    case Family::densenet: return build_mini_densenet(config);
    case Family::resnet: return build_mini_resnet(config);
    case Family::concat_standin: return build_concat_standin(config);
  }
  throw ConfigError("unhandled backbone family");
}

}  // namespace elastic

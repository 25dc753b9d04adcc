#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "elastic/graph.hpp"

namespace elastic {

enum class Family { vgg, mobilenet, densenet, resnet, concat_standin };
enum class Scale { mini, full_audit };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

/// Everything a builder needs to reproduce a backbone. Fields that do not
/// apply to `family` are ignored.
struct BackboneConfig {
  std::string name;
  Family family = Family::mobilenet;
  Scale scale = Scale::mini;
  FeatureShape input{32, 32, 3};

  // Shared stem (mobilenet, densenet, resnet, concat stand-in).
  std::size_t stem_channels = 8;
  std::size_t stem_kernel = 3;
  std::size_t stem_stride = 1;
  bool stem_max_pool = false;

  // vgg: conv count and width of each stage; one max pool per stage.
  std::vector<std::size_t> stage_convs;
  std::vector<std::size_t> stage_channels;

  // mobilenet: width multiplier alpha, resolution multiplier rho, and the
  // pointwise width / depthwise stride of each block.
  double alpha = 1.0;
  double rho = 1.0;
  std::vector<std::size_t> block_channels;
  std::vector<std::size_t> block_strides;

  // densenet
  std::size_t growth_rate = 8;
  std::vector<std::size_t> dense_layers;
  bool bottleneck = false;
  double compression = 0.5;

  // resnet: residual blocks per stage (stage widths in stage_channels).
  std::vector<std::size_t> stage_blocks;
  std::size_t bottleneck_ratio = 4;
  bool final_feature_anchor = false;

  // concat stand-in
  std::size_t concat_blocks = 3;

  static BackboneConfig mini_vgg();
  static BackboneConfig mini_mobilenet();
  static BackboneConfig mini_densenet();
  static BackboneConfig mini_resnet();
  static BackboneConfig concat_standin(std::size_t blocks = 3);
  /// densenet-121, densenet-169 or mobilenet at 224x224x3, shape only.
  static BackboneConfig full_audit(std::string_view name);
  /// Any of the names above (mini-vgg, mini-mobilenet, mini-densenet,
  /// mini-resnet, concat-standin, densenet-121, densenet-169, mobilenet).
  static BackboneConfig by_name(std::string_view name);
  static std::vector<std::string> known_names();

  /// Input extent after the resolution multiplier.
  FeatureShape effective_input() const;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

NetworkGraph build_mini_vgg(const BackboneConfig& config);
NetworkGraph build_mini_mobilenet(const BackboneConfig& config);
NetworkGraph build_mini_densenet(const BackboneConfig& config);
NetworkGraph build_mini_resnet(const BackboneConfig& config);

/// Inception-style blocks of parallel 1x1 / 3x3 branches joined by concat.
/// Exits go after every concat except the last, which hosts the final exit.
NetworkGraph build_concat_standin(const BackboneConfig& config);

/// Shape-only full-size graph: densenet-121, densenet-169 or mobilenet.
NetworkGraph build_full_audit_graph(std::string_view name);

/// Dispatches on family and scale. Weights of mini graphs are allocated
/// but left at their deterministic defaults; see initialize_weights.
NetworkGraph build_backbone(const BackboneConfig& config);

}  // namespace elastic

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elastic/kernels.hpp"
#include "elastic/tensor.hpp"

namespace elastic {

enum class LayerKind { input, conv2d, depthwise_conv2d, batch_norm, relu, max_pool, avg_pool, add, concat };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// Per-sample activation extent (height, width, channels).
struct FeatureShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

/// Hyperparameters of one backbone layer. Fields irrelevant to `kind` are
/// ignored.
struct LayerSpec {
  LayerKind kind = LayerKind::input;
  std::size_t kernel = 1;   // conv window or pool window
  std::size_t stride = 1;
  Padding padding = Padding::same;
  std::size_t filters = 0;  // conv2d output channels
  bool use_bias = false;    // conv2d / depthwise
  double epsilon = 1e-3;    // batch norm
  double momentum = 0.99;   // batch norm moving-average decay

  static LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                        bool bias = false, Padding padding = Padding::same);
  static LayerSpec depthwise(std::size_t kernel, std::size_t stride = 1, bool bias = false,
                             Padding padding = Padding::same);
  static LayerSpec batch_norm();
  static LayerSpec relu();
  static LayerSpec max_pool(std::size_t size = 2, std::size_t stride = 2,
                            Padding padding = Padding::valid);
  static LayerSpec avg_pool(std::size_t size = 2, std::size_t stride = 2,
                            Padding padding = Padding::valid);
  static LayerSpec add();
  static LayerSpec concat();
};

/// Declared parameter tensor of a layer.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool trainable = true;
};

/// Output extent of a layer given its input extents. Throws ShapeError on
/// incompatible inputs.
FeatureShape infer_shape(const LayerSpec& layer, std::span<const FeatureShape> inputs);

/// Parameter tensors the layer owns, in storage order.
std::vector<ParamSpec> parameter_specs(const LayerSpec& layer, std::span<const FeatureShape> inputs);

/// Closed-form parameter count; must equal the summed sizes of
/// parameter_specs.
std::uint64_t parameter_count(const LayerSpec& layer, std::span<const FeatureShape> inputs);

/// Forward FLOPs for one sample. Convolutions count 2 per multiply-add;
/// elementwise ops and pooling 1 per output element; batch norm 2 per
/// element; concat and input are free.
std::uint64_t flop_count(const LayerSpec& layer, std::span<const FeatureShape> inputs,
                         const FeatureShape& output);

/// Exit head (global average pool -> dropout -> dense -> softmax) cost.
std::uint64_t head_parameter_count(std::size_t features, std::size_t classes);
std::uint64_t head_flop_count(std::size_t features, std::size_t classes);

/// True for conv2d and depthwise_conv2d, the layers counted as network depth.
bool is_conv(LayerKind kind);

}  // namespace elastic

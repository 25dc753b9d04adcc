#include "elastic/layer.hpp"

#include <array>
#include <string>
#include <utility>

namespace elastic {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 9> kKindNames{{
    {LayerKind::input, "input"},
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::depthwise_conv2d, "depthwise_conv2d"},
    {LayerKind::batch_norm, "batch_norm"},
    {LayerKind::relu, "relu"},
    {LayerKind::max_pool, "max_pool"},
    {LayerKind::avg_pool, "avg_pool"},
    {LayerKind::add, "add"},
    {LayerKind::concat, "concat"},
}};

const FeatureShape& single_input(std::span<const FeatureShape> inputs, LayerKind kind) {
  if (inputs.size() != 1) {
    throw ShapeError(std::string(to_string(kind)) + " takes exactly one input, got " +
                     std::to_string(inputs.size()));
  }
  return inputs[0];
}

FeatureShape windowed(const FeatureShape& in, const LayerSpec& layer, std::size_t channels) {
  return FeatureShape{plan_axis(in.height, layer.kernel, layer.stride, layer.padding).out,
                      plan_axis(in.width, layer.kernel, layer.stride, layer.padding).out, channels};
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, std::size_t stride, bool bias,
                          Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.use_bias = bias;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::depthwise(std::size_t kernel, std::size_t stride, bool bias, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::depthwise_conv2d;
  s.kernel = kernel;
  s.stride = stride;
  s.use_bias = bias;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::batch_norm() {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t size, std::size_t stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::max_pool;
  s.kernel = size;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t size, std::size_t stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::avg_pool;
  s.kernel = size;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::add() {
  LayerSpec s;
  s.kind = LayerKind::add;
  return s;
}

LayerSpec LayerSpec::concat() {
  LayerSpec s;
  s.kind = LayerKind::concat;
  return s;
}

bool is_conv(LayerKind kind) {
  return kind == LayerKind::conv2d || kind == LayerKind::depthwise_conv2d;
}

FeatureShape infer_shape(const LayerSpec& layer, std::span<const FeatureShape> inputs) {
  switch (layer.kind) {
    case LayerKind::input:
      throw ShapeError("input nodes have no inferred shape");
    case LayerKind::conv2d: {
      const auto& in = single_input(inputs, layer.kind);
      if (layer.filters == 0) throw ShapeError("conv2d needs at least one filter");
      return windowed(in, layer, layer.filters);
    }
    case LayerKind::depthwise_conv2d:
    case LayerKind::max_pool:
    case LayerKind::avg_pool: {
      const auto& in = single_input(inputs, layer.kind);
      return windowed(in, layer, in.channels);
    }
    case LayerKind::batch_norm:
    case LayerKind::relu:
      return single_input(inputs, layer.kind);
    case LayerKind::add: {
      if (inputs.empty()) throw ShapeError("add needs at least one input");
      for (const auto& s : inputs) {
        if (!(s == inputs[0])) throw ShapeError("add inputs must have identical shapes");
      }
      return inputs[0];
    }
    case LayerKind::concat: {
      if (inputs.empty()) throw ShapeError("concat needs at least one input");
      FeatureShape out = inputs[0];
      out.channels = 0;
      for (const auto& s : inputs) {
        if (s.height != out.height || s.width != out.width) {
          throw ShapeError("concat inputs must share spatial extents");
        }
        out.channels += s.channels;
      }
      return out;
    }
  }
  throw ShapeError("unhandled layer kind");
}

std::vector<ParamSpec> parameter_specs(const LayerSpec& layer, std::span<const FeatureShape> inputs) {
  std::vector<ParamSpec> specs;
  switch (layer.kind) {
    case LayerKind::conv2d: {
      const std::size_t cin = single_input(inputs, layer.kind).channels;
      specs.push_back({"kernel", {layer.kernel, layer.kernel, cin, layer.filters}, true});
      if (layer.use_bias) specs.push_back({"bias", {layer.filters}, true});
      break;
    }
    case LayerKind::depthwise_conv2d: {
      const std::size_t c = single_input(inputs, layer.kind).channels;
      specs.push_back({"kernel", {layer.kernel, layer.kernel, c}, true});
      if (layer.use_bias) specs.push_back({"bias", {c}, true});
      break;
    }
    case LayerKind::batch_norm: {
      const std::size_t c = single_input(inputs, layer.kind).channels;
      specs.push_back({"gamma", {c}, true});
      specs.push_back({"beta", {c}, true});
      specs.push_back({"moving_mean", {c}, false});
      specs.push_back({"moving_variance", {c}, false});
      break;
    }
    default:
      break;
  }
  return specs;
}

std::uint64_t parameter_count(const LayerSpec& layer, std::span<const FeatureShape> inputs) {
  switch (layer.kind) {
    case LayerKind::conv2d: {
      const std::uint64_t cin = single_input(inputs, layer.kind).channels;
      const std::uint64_t k = layer.kernel;
      return k * k * cin * layer.filters + (layer.use_bias ? layer.filters : 0);
    }
    case LayerKind::depthwise_conv2d: {
      const std::uint64_t c = single_input(inputs, layer.kind).channels;
      const std::uint64_t k = layer.kernel;
      return k * k * c + (layer.use_bias ? c : 0);
    }
    case LayerKind::batch_norm:
      return 4 * static_cast<std::uint64_t>(single_input(inputs, layer.kind).channels);
    default:
      return 0;
  }
}

std::uint64_t flop_count(const LayerSpec& layer, std::span<const FeatureShape> inputs,
                         const FeatureShape& output) {
  const std::uint64_t out_elems = output.size();
  const std::uint64_t out_pixels = static_cast<std::uint64_t>(output.height) * output.width;
  const std::uint64_t k = layer.kernel;
  switch (layer.kind) {
    case LayerKind::input:
    case LayerKind::concat:
      return 0;
    case LayerKind::conv2d:
      return 2 * out_pixels * output.channels * k * k * single_input(inputs, layer.kind).channels;
    case LayerKind::depthwise_conv2d:
      return 2 * out_pixels * output.channels * k * k;
    case LayerKind::batch_norm:
      return 2 * out_elems;
    case LayerKind::relu:
    case LayerKind::max_pool:
    case LayerKind::avg_pool:
      return out_elems;
    case LayerKind::add:
      return out_elems * (inputs.size() > 1 ? inputs.size() - 1 : 1);
  }
  return 0;
}

std::uint64_t head_parameter_count(std::size_t features, std::size_t classes) {
  return static_cast<std::uint64_t>(features) * classes + classes;
}

std::uint64_t head_flop_count(std::size_t features, std::size_t classes) {
  // pooled features + dense multiply-adds + softmax outputs
  return features + 2ULL * features * classes + classes;
}

}  // namespace elastic

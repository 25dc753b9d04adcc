#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "elastic/layer.hpp"
#include "elastic/tensor.hpp"

namespace elastic {

using NodeId = std::size_t;

/// A named parameter tensor. `value` is empty for shape-only graphs.
struct Parameter {
  std::string name;
  Shape shape;
  bool trainable = true;
  std::optional<Tensor<float>> value;

  std::uint64_t size() const { return shape_size(shape); }
};

struct GraphNode {
  std::string name;
  LayerSpec layer;
  std::vector<NodeId> inputs;
  FeatureShape shape;
  std::vector<Parameter> params;
};

/// Where an exit may attach.
enum class AnchorKind {
  depthwise_block_relu,
  transition_avg_pool,
  max_pool,
  residual_add,
  block_concat,
  final_feature,
};

std::string_view to_string(AnchorKind kind);

struct Anchor {
  NodeId node = 0;
  AnchorKind kind = AnchorKind::final_feature;
  std::size_t ordinal = 0;   // 1-based, in depth order
  std::size_t channels = 0;  // channel extent of the node output
};

/// Backbone DAG. Nodes are appended in topological order (a node may only
/// consume nodes that already exist), node 0 is the input, and anchors are
/// registered in strictly increasing node order.
class NetworkGraph {
 public:
  /// `allocate` false builds a shape-only graph with no weight storage.
  NetworkGraph(FeatureShape input, bool allocate);

  NodeId input() const { return 0; }
  NodeId add(std::string name, const LayerSpec& layer, std::vector<NodeId> inputs);
  void mark_anchor(NodeId node, AnchorKind kind);
  void set_final_feature(NodeId node) { final_feature_ = node; }

  const GraphNode& node(NodeId id) const { return nodes_.at(id); }
  GraphNode& node(NodeId id) { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  NodeId final_feature() const { return final_feature_; }
  FeatureShape input_shape() const { return nodes_.front().shape; }
  bool allocated() const { return allocated_; }

  /// Inclusive ancestor mask of `id`: every node whose output can reach it.
  std::vector<bool> ancestors(NodeId id) const;

  /// Number of conv / depthwise layers among the inclusive ancestors.
  std::size_t conv_depth(NodeId id) const;

  /// Parameter count summed over the given node mask, by enumeration of
  /// the stored parameter tensors.
  std::uint64_t enumerated_parameters(const std::vector<bool>& mask) const;

  /// Same quantity from the closed-form per-layer formulas.
  std::uint64_t formula_parameters(const std::vector<bool>& mask) const;

  std::uint64_t flops(const std::vector<bool>& mask) const;

  /// Re-checks topological order, shapes, anchor ordering and channel counts.
  void validate() const;

  std::vector<FeatureShape> input_shapes(NodeId id) const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<Anchor> anchors_;
  NodeId final_feature_ = 0;
  bool allocated_;
};

/// He-uniform kernels (limit sqrt(6 / fan_in)), zero biases, unit gamma and
/// moving variance, zero beta and moving mean.
void initialize_weights(NetworkGraph& graph, std::mt19937_64& rng);

/// Structural equality: node kinds, hyperparameters, edges, shapes, anchors.
bool isomorphic(const NetworkGraph& a, const NetworkGraph& b);

}  // namespace elastic

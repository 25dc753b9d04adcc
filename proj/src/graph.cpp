#include "elastic/graph.hpp"

#include <cmath>
#include <string>

namespace elastic {

std::string_view to_string(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::depthwise_block_relu: return "relu-of-depthwise-block";
    case AnchorKind::transition_avg_pool: return "transition-avg-pool";
    case AnchorKind::max_pool: return "maxpool";
    case AnchorKind::residual_add: return "residual-add";
    case AnchorKind::block_concat: return "block-concat";
    case AnchorKind::final_feature: return "final-feature";
  }
  return "unknown";
}

NetworkGraph::NetworkGraph(FeatureShape input, bool allocate) : allocated_(allocate) {
  if (input.height == 0 || input.width == 0 || input.channels == 0) {
    throw ShapeError("network input extents must be positive");
  }
  GraphNode in;
  in.name = "input";
  in.layer.kind = LayerKind::input;
  in.shape = input;
  nodes_.push_back(std::move(in));
}

std::vector<FeatureShape> NetworkGraph::input_shapes(NodeId id) const {
  std::vector<FeatureShape> shapes;
  for (NodeId src : nodes_.at(id).inputs) shapes.push_back(nodes_.at(src).shape);
  return shapes;
}

NodeId NetworkGraph::add(std::string name, const LayerSpec& layer, std::vector<NodeId> inputs) {
  if (layer.kind == LayerKind::input) throw GraphError("only node 0 may be an input");
  if (inputs.empty()) throw GraphError("node '" + name + "' has no inputs");
  std::vector<FeatureShape> in_shapes;
  for (NodeId src : inputs) {
    if (src >= nodes_.size()) {
      throw GraphError("node '" + name + "' consumes unknown node " + std::to_string(src));
    }
    in_shapes.push_back(nodes_[src].shape);
  }
  GraphNode node;
  node.name = std::move(name);
  node.layer = layer;
  node.inputs = std::move(inputs);
  node.shape = infer_shape(layer, in_shapes);
  for (auto& spec : parameter_specs(layer, in_shapes)) {
    Parameter p{spec.name, spec.shape, spec.trainable, std::nullopt};
    if (allocated_) {
      const bool unit = spec.name == "gamma" || spec.name == "moving_variance";
      p.value.emplace(spec.shape, unit ? 1.0f : 0.0f);
    }
    node.params.push_back(std::move(p));
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void NetworkGraph::mark_anchor(NodeId node, AnchorKind kind) {
  if (node >= nodes_.size()) throw GraphError("anchor on unknown node");
  if (!anchors_.empty() && anchors_.back().node >= node) {
    throw GraphError("anchors must be registered in increasing depth order");
  }
  anchors_.push_back(Anchor{node, kind, anchors_.size() + 1, nodes_[node].shape.channels});
}

std::vector<bool> NetworkGraph::ancestors(NodeId id) const {
  std::vector<bool> mask(nodes_.size(), false);
  mask.at(id) = true;
  for (NodeId n = id + 1; n-- > 0;) {
    if (!mask[n]) continue;
    for (NodeId src : nodes_[n].inputs) mask[src] = true;
  }
  return mask;
}

std::size_t NetworkGraph::conv_depth(NodeId id) const {
  const auto mask = ancestors(id);
  std::size_t depth = 0;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    if (mask[n] && is_conv(nodes_[n].layer.kind)) ++depth;
  }
  return depth;
}

std::uint64_t NetworkGraph::enumerated_parameters(const std::vector<bool>& mask) const {
  std::uint64_t total = 0;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    if (!mask.at(n)) continue;
    for (const auto& p : nodes_[n].params) {
      total += p.value ? p.value->size() : p.size();
    }
  }
  return total;
}

std::uint64_t NetworkGraph::formula_parameters(const std::vector<bool>& mask) const {
  std::uint64_t total = 0;
  for (NodeId n = 1; n < nodes_.size(); ++n) {
    if (mask.at(n)) total += parameter_count(nodes_[n].layer, input_shapes(n));
  }
  return total;
}

std::uint64_t NetworkGraph::flops(const std::vector<bool>& mask) const {
  std::uint64_t total = 0;
  for (NodeId n = 1; n < nodes_.size(); ++n) {
    if (mask.at(n)) total += flop_count(nodes_[n].layer, input_shapes(n), nodes_[n].shape);
  }
  return total;
}

void NetworkGraph::validate() const {
  if (nodes_.empty() || nodes_[0].layer.kind != LayerKind::input) {
    throw GraphError("graph must start with an input node");
  }
  for (NodeId n = 1; n < nodes_.size(); ++n) {
    const auto& node = nodes_[n];
    if (node.inputs.empty()) throw GraphError("node '" + node.name + "' unreachable from input");
    for (NodeId src : node.inputs) {
      if (src >= n) throw GraphError("node '" + node.name + "' breaks topological order");
    }
    if (!(infer_shape(node.layer, input_shapes(n)) == node.shape)) {
      throw GraphError("node '" + node.name + "' has a stale shape");
    }
  }
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const auto& a = anchors_[i];
    if (a.ordinal != i + 1) throw GraphError("anchor ordinals must be 1..N");
    if (i > 0 && anchors_[i - 1].node >= a.node) throw GraphError("anchors out of depth order");
    if (a.channels != nodes_.at(a.node).shape.channels) {
      throw GraphError("anchor " + std::to_string(a.ordinal) + " channel count disagrees with node");
    }
  }
  if (!anchors_.empty() && anchors_.back().node > final_feature_) {
    throw GraphError("last anchor lies beyond the final feature node");
  }
}

void initialize_weights(NetworkGraph& graph, std::mt19937_64& rng) {
  if (!graph.allocated()) throw GraphError("cannot initialize a shape-only graph");
  for (NodeId n = 1; n < graph.size(); ++n) {
    auto& node = graph.node(n);
    const auto in_shapes = graph.input_shapes(n);
    for (auto& p : node.params) {
      if (p.name != "kernel") continue;
      std::size_t fan_in = node.layer.kernel * node.layer.kernel;
      if (node.layer.kind == LayerKind::conv2d) fan_in *= in_shapes.at(0).channels;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : p.value->data()) v = static_cast<float>(dist(rng));
    }
  }
}

bool isomorphic(const NetworkGraph& a, const NetworkGraph& b) {
  if (a.size() != b.size() || a.final_feature() != b.final_feature()) return false;
  for (NodeId n = 0; n < a.size(); ++n) {
    const auto& x = a.node(n);
    const auto& y = b.node(n);
    if (x.layer.kind != y.layer.kind || x.layer.kernel != y.layer.kernel ||
        x.layer.stride != y.layer.stride || x.layer.padding != y.layer.padding ||
        x.layer.filters != y.layer.filters || x.layer.use_bias != y.layer.use_bias ||
        x.inputs != y.inputs || !(x.shape == y.shape) || x.params.size() != y.params.size()) {
      return false;
    }
    for (std::size_t i = 0; i < x.params.size(); ++i) {
      if (x.params[i].shape != y.params[i].shape || x.params[i].name != y.params[i].name) return false;
    }
  }
  if (a.anchors().size() != b.anchors().size()) return false;
  for (std::size_t i = 0; i < a.anchors().size(); ++i) {
    const auto& p = a.anchors()[i];
    const auto& q = b.anchors()[i];
    if (p.node != q.node || p.kind != q.kind || p.channels != q.channels) return false;
  }
  return true;
}

}  // namespace elastic

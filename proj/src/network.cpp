#include "elastic/network.hpp"

#include <cmath>
#include <string>

#include "elastic/kernels.hpp"

namespace elastic {

ElasticNetwork::ElasticNetwork(NetworkGraph backbone, std::vector<ExitHead> exits,
                               std::size_t classes, std::optional<BackboneConfig> config)
    : backbone_(std::move(backbone)), exits_(std::move(exits)), classes_(classes),
      config_(std::move(config)) {
  if (exits_.empty()) throw ContractViolation("an elastic network needs at least one exit");
  if (classes_ < 1) throw ContractViolation("class count must be >= 1");
  for (std::size_t i = 0; i < exits_.size(); ++i) {
    const auto& e = exits_[i];
    if (i > 0 && exits_[i - 1].node >= e.node) throw GraphError("exits must be ordered by depth");
    if (e.features != backbone_.node(e.node).shape.channels) {
      throw GraphError("exit " + std::to_string(i + 1) + " feature count disagrees with its anchor");
    }
  }
}

const ExitHead& ElasticNetwork::exit(std::size_t ordinal) const {
  if (ordinal < 1 || ordinal > exits_.size()) {
    throw ContractViolation("exit ordinal " + std::to_string(ordinal) + " outside 1.." +
                            std::to_string(exits_.size()));
  }
  return exits_[ordinal - 1];
}

ExitHead& ElasticNetwork::exit(std::size_t ordinal) {
  return const_cast<ExitHead&>(std::as_const(*this).exit(ordinal));
}

std::vector<double> ElasticNetwork::loss_weights() const {
  std::vector<double> w;
  for (const auto& e : exits_) w.push_back(e.loss_weight);
  return w;
}

void ElasticNetwork::set_loss_weights(const std::vector<double>& weights) {
  if (weights.size() != exits_.size()) {
    throw ContractViolation("got " + std::to_string(weights.size()) + " loss weights for " +
                            std::to_string(exits_.size()) + " exits");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) exits_[i].loss_weight = weights[i];
}

std::vector<ParamRef> ElasticNetwork::parameters() {
  std::vector<ParamRef> refs;
  for (NodeId n = 1; n < backbone_.size(); ++n) {
    auto& node = backbone_.node(n);
    for (auto& p : node.params) refs.push_back({node.name + "/" + p.name, &p, false});
  }
  for (auto& e : exits_) {
    const std::string prefix = "exit@" + std::to_string(e.anchor) + "/";
    refs.push_back({prefix + "kernel", &e.kernel, true});
    refs.push_back({prefix + "bias", &e.bias, true});
  }
  return refs;
}

ElasticNetwork elasticize(NetworkGraph backbone, const HeadConfig& head, std::mt19937_64& rng,
                          std::optional<BackboneConfig> config) {
  if (backbone.anchors().empty()) throw GraphError("backbone has no exit anchors");
  if (!(head.dropout >= 0.0 && head.dropout < 1.0)) {
    throw ContractViolation("exit dropout must lie in [0, 1)");
  }
  const std::size_t c = head.classes;
  std::vector<ExitHead> exits;
  for (const auto& a : backbone.anchors()) {
    const std::size_t f = a.channels;
    if (f == 0 || f != backbone.node(a.node).shape.channels) {
      throw GraphError("anchor " + std::to_string(a.ordinal) + " has an unknown channel count");
    }
    ExitHead e;
    e.anchor = a.ordinal;
    e.node = a.node;
    e.features = f;
    e.dropout = head.dropout;
    e.kernel = Parameter{"kernel", {f, c}, true, std::nullopt};
    e.bias = Parameter{"bias", {c}, true, std::nullopt};
    if (backbone.allocated()) {
      const double limit = std::sqrt(6.0 / static_cast<double>(f + c));
      std::uniform_real_distribution<double> dist(-limit, limit);
      e.kernel.value.emplace(Shape{f, c});
      for (auto& v : e.kernel.value->data()) v = static_cast<float>(dist(rng));
      e.bias.value.emplace(Shape{c});
    }
    exits.push_back(std::move(e));
  }
  return ElasticNetwork(std::move(backbone), std::move(exits), c, std::move(config));
}

ElasticNetwork prune_exits(const ElasticNetwork& net, const std::set<std::size_t>& keep) {
  const std::size_t n = net.exit_count();
  for (std::size_t k : keep) {
    if (k < 1 || k >= n) {
      throw ContractViolation("cannot keep exit " + std::to_string(k) +
                              ": intermediate exits are 1.." + std::to_string(n - 1));
    }
  }
  std::vector<ExitHead> exits;
  for (std::size_t i = 1; i < n; ++i) {
    if (keep.count(i)) exits.push_back(net.exit(i));
  }
  exits.push_back(net.exit(n));
  return ElasticNetwork(net.backbone(), std::move(exits), net.classes(), net.config());
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  // FNV-1a keeps the stream assignment independent of the standard library.
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

ElasticNetwork make_elastic_network(const BackboneConfig& config, const HeadConfig& head,
                                    std::uint64_t seed) {
  NetworkGraph g = build_backbone(config);
  auto rng = substream(seed, "init");
  if (g.allocated()) initialize_weights(g, rng);
  return elasticize(std::move(g), head, rng, config);
}

// -- execution ----------------------------------------------------------------

template <typename T>
NetworkPass<T> run_network(ElasticNetwork& net, const Tensor<T>& batch, const RunOptions& options) {
  const auto& g = net.backbone();
  if (!g.allocated()) throw GraphError("cannot run a shape-only network");
  const FeatureShape in = g.input_shape();
  if (batch.rank() != 4 || batch.dim(1) != in.height || batch.dim(2) != in.width ||
      batch.dim(3) != in.channels) {
    throw ShapeError("batch " + shape_string(batch.shape()) + " does not match network input (N, " +
                     std::to_string(in.height) + ", " + std::to_string(in.width) + ", " +
                     std::to_string(in.channels) + ")");
  }
  const bool train = options.mode == Mode::train;

  std::vector<bool> run_exit(net.exit_count(), options.exits.empty());
  for (std::size_t e : options.exits) {
    net.exit(e);  // range check
    run_exit[e - 1] = true;
  }
  std::vector<bool> needed(g.size(), false);
  for (std::size_t i = 0; i < net.exit_count(); ++i) {
    if (!run_exit[i]) continue;
    const auto mask = g.ancestors(net.exits()[i].node);
    for (NodeId n = 0; n < g.size(); ++n) needed[n] = needed[n] || mask[n];
  }

  NetworkPass<T> pass;
  pass.node_slots.assign(g.size(), NetworkPass<T>::npos);
  pass.logits.assign(net.exit_count(), NetworkPass<T>::npos);
  auto& tape = pass.tape;

  std::size_t param_index = 0;
  const bool grad_backbone = train && options.backbone_trainable;
  const bool bn_batch_stats = grad_backbone;

  auto param_leaf = [&](const Parameter& p, std::size_t index, bool grad) {
    const SlotId s = tape.leaf(p.value->template cast<T>(), grad && p.trainable);
    if (grad && p.trainable) pass.param_slots.emplace_back(index, s);
    return s;
  };

  pass.node_slots[0] = tape.leaf(batch, false);
  for (NodeId n = 1; n < g.size(); ++n) {
    const auto& node = g.node(n);
    const std::size_t first_param = param_index;
    param_index += node.params.size();
    if (!needed[n]) continue;
    if (options.on_node) options.on_node(n);

    std::vector<SlotId> inputs;
    for (NodeId src : node.inputs) inputs.push_back(pass.node_slots[src]);
    std::vector<SlotId> p;
    for (std::size_t k = 0; k < node.params.size(); ++k) {
      p.push_back(param_leaf(node.params[k], first_param + k, grad_backbone));
    }
    const auto& L = node.layer;
    SlotId out = 0;
    switch (L.kind) {
      case LayerKind::input:
        throw GraphError("unexpected input node");
      case LayerKind::conv2d:
        inputs.insert(inputs.end(), p.begin(), p.end());
        out = tape.template emplace<Conv2dOp<T>>(inputs, L.stride, L.padding);
        break;
      case LayerKind::depthwise_conv2d:
        inputs.insert(inputs.end(), p.begin(), p.end());
        out = tape.template emplace<DepthwiseConv2dOp<T>>(inputs, L.stride, L.padding);
        break;
      case LayerKind::batch_norm:
        if (bn_batch_stats) {
          auto op = std::make_shared<BatchNormTrainOp<T>>(L.epsilon);
          out = tape.apply(op, {inputs[0], p[0], p[1]});
          pass.bn_ops.emplace_back(n, op);
        } else {
          out = tape.template emplace<BatchNormInferOp<T>>({inputs[0], p[0], p[1], p[2], p[3]},
                                                           L.epsilon);
        }
        break;
      case LayerKind::relu:
        out = tape.template emplace<ReluOp<T>>(inputs);
        break;
      case LayerKind::max_pool:
        out = tape.template emplace<MaxPoolOp<T>>(inputs, L.kernel, L.stride, L.padding);
        break;
      case LayerKind::avg_pool:
        out = tape.template emplace<AvgPoolOp<T>>(inputs, L.kernel, L.stride, L.padding);
        break;
      case LayerKind::add:
        out = tape.template emplace<AddOp<T>>(inputs);
        break;
      case LayerKind::concat:
        out = tape.template emplace<ConcatOp<T>>(inputs);
        break;
    }
    pass.node_slots[n] = out;
  }

  const bool grad_heads = train && options.heads_trainable;
  for (std::size_t i = 0; i < net.exit_count(); ++i) {
    const std::size_t kernel_index = param_index + 2 * i;
    if (!run_exit[i]) continue;
    const auto& e = net.exits()[i];
    SlotId x = tape.template emplace<GlobalAvgPoolOp<T>>({pass.node_slots[e.node]});
    if (train && e.dropout > 0.0) {
      if (!options.dropout_rng) throw ContractViolation("train mode needs a dropout generator");
      x = tape.apply(std::make_shared<DropoutOp<T>>(e.dropout, tape.value(x).shape(),
                                                    *options.dropout_rng),
                     {x});
    }
    const SlotId w = param_leaf(e.kernel, kernel_index, grad_heads);
    const SlotId b = param_leaf(e.bias, kernel_index + 1, grad_heads);
    pass.logits[i] = tape.template emplace<DenseOp<T>>({x, w, b});
  }
  return pass;
}

template <typename T>
void update_moving_statistics(ElasticNetwork& net, const NetworkPass<T>& pass) {
  for (const auto& [n, op] : pass.bn_ops) {
    auto& node = net.backbone().node(n);
    const double m = node.layer.momentum;
    auto mean = node.params.at(2).value->data();
    auto var = node.params.at(3).value->data();
    const auto& bm = op->batch_mean();
    const auto& bv = op->batch_var();
    for (std::size_t c = 0; c < mean.size(); ++c) {
      mean[c] = static_cast<float>(m * mean[c] + (1.0 - m) * static_cast<double>(bm[c]));
      var[c] = static_cast<float>(m * var[c] + (1.0 - m) * static_cast<double>(bv[c]));
    }
  }
}

std::vector<Tensor<float>> forward_all_exits(ElasticNetwork& net, const Tensor<float>& batch,
                                             Mode mode, std::mt19937_64* dropout_rng) {
  RunOptions options;
  options.mode = mode;
  options.dropout_rng = dropout_rng;
  const auto pass = run_network(net, batch, options);
  std::vector<Tensor<float>> probs;
  for (SlotId s : pass.logits) probs.push_back(kernels::softmax_rows(pass.tape.value(s)));
  return probs;
}

std::size_t argmax(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction predict(ElasticNetwork& net, const Tensor<float>& input, std::size_t exit,
                   const std::function<void(NodeId)>& on_node) {
  net.exit(exit);
  Tensor<float> batch = input.rank() == 3 ? input.reshaped({1, input.dim(0), input.dim(1), input.dim(2)})
                                          : input;
  if (batch.rank() != 4 || batch.dim(0) != 1) {
    throw ShapeError("predict takes one sample, got " + shape_string(input.shape()));
  }
  RunOptions options;
  options.exits = {exit};
  options.on_node = on_node;
  const auto pass = run_network(net, batch, options);
  const auto probs = kernels::softmax_rows(pass.tape.value(pass.logits[exit - 1]));
  Prediction p;
  p.probabilities.assign(probs.data().begin(), probs.data().end());
  p.label = argmax(p.probabilities);
  return p;
}

template NetworkPass<float> run_network(ElasticNetwork&, const Tensor<float>&, const RunOptions&);
template NetworkPass<double> run_network(ElasticNetwork&, const Tensor<double>&, const RunOptions&);
template void update_moving_statistics(ElasticNetwork&, const NetworkPass<float>&);
template void update_moving_statistics(ElasticNetwork&, const NetworkPass<double>&);

}  // namespace elastic

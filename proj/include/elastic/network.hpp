#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "elastic/autodiff.hpp"
#include "elastic/backbones.hpp"
#include "elastic/graph.hpp"
#include "elastic/ops.hpp"

namespace elastic {

struct HeadConfig {
  std::size_t classes = 10;
  double dropout = 0.2;
};

/// global average pool -> dropout -> dense (F x C) -> softmax, hanging off
/// one backbone anchor.
struct ExitHead {
  std::size_t anchor = 0;  // ordinal of the backbone anchor (1-based)
  NodeId node = 0;
  std::size_t features = 0;
  double dropout = 0.2;
  double loss_weight = 1.0;
  Parameter kernel;  // (F, C)
  Parameter bias;    // (C)

  std::uint64_t parameter_count() const { return kernel.size() + bias.size(); }
};

/// Mutable reference to one stored parameter tensor.
struct ParamRef {
  std::string name;
  Parameter* param = nullptr;
  bool in_head = false;
};

class ElasticNetwork {
 public:
  ElasticNetwork(NetworkGraph backbone, std::vector<ExitHead> exits, std::size_t classes,
                 std::optional<BackboneConfig> config = std::nullopt);

  const NetworkGraph& backbone() const { return backbone_; }
  NetworkGraph& backbone() { return backbone_; }
  const std::optional<BackboneConfig>& config() const { return config_; }

  std::size_t exit_count() const { return exits_.size(); }
  std::size_t classes() const { return classes_; }
  /// 1-based; throws ContractViolation when out of range.
  const ExitHead& exit(std::size_t ordinal) const;
  ExitHead& exit(std::size_t ordinal);
  const std::vector<ExitHead>& exits() const { return exits_; }

  std::vector<double> loss_weights() const;
  void set_loss_weights(const std::vector<double>& weights);

  /// Every stored parameter: backbone nodes in graph order, then the heads.
  /// Backbone names are "<node>/<param>", head names "exit@<anchor>/kernel".
  std::vector<ParamRef> parameters();

 private:
  NetworkGraph backbone_;
  std::vector<ExitHead> exits_;
  std::size_t classes_;
  std::optional<BackboneConfig> config_;
};

/// One exit head per backbone anchor. Dense kernels are drawn uniformly in
/// +-sqrt(6 / (F + C)), biases start at zero. Shape-only backbones get
/// shape-only heads.
ElasticNetwork elasticize(NetworkGraph backbone, const HeadConfig& head, std::mt19937_64& rng,
                          std::optional<BackboneConfig> config = std::nullopt);

/// Keeps the listed intermediate exits (1-based, each < N) plus the final.
ElasticNetwork prune_exits(const ElasticNetwork& net, const std::set<std::size_t>& keep);

/// Builds the backbone, initializes it from the "init" stream of `seed`
/// and attaches heads.
ElasticNetwork make_elastic_network(const BackboneConfig& config, const HeadConfig& head,
                                    std::uint64_t seed);

/// Named random sub-stream derived from a run seed.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

// -- execution --------------------------------------------------------------

enum class Mode { train, eval };

struct RunOptions {
  Mode mode = Mode::eval;
  bool backbone_trainable = true;  // false: backbone params constant, batch norm on moving stats
  bool heads_trainable = true;
  /// 1-based exits to compute; empty means all.
  std::vector<std::size_t> exits;
  std::mt19937_64* dropout_rng = nullptr;  // required for train mode with dropout > 0
  /// Called once per backbone node actually executed.
  std::function<void(NodeId)> on_node;
};

template <typename T>
struct NetworkPass {
  Tape<T> tape;
  static constexpr SlotId npos = static_cast<SlotId>(-1);
  std::vector<SlotId> node_slots;  // per backbone node, npos when skipped
  std::vector<SlotId> logits;      // per exit, npos when skipped
  /// Index into ElasticNetwork::parameters() and the leaf slot holding it.
  std::vector<std::pair<std::size_t, SlotId>> param_slots;
  /// Training-mode batch norm ops by node, for the moving-average update.
  std::vector<std::pair<NodeId, std::shared_ptr<BatchNormTrainOp<T>>>> bn_ops;
};

/// Runs the backbone once over the union of the requested exits' ancestors
/// and records each requested head up to its logits.
template <typename T>
NetworkPass<T> run_network(ElasticNetwork& net, const Tensor<T>& batch, const RunOptions& options);

/// moving = momentum * moving + (1 - momentum) * batch statistic.
template <typename T>
void update_moving_statistics(ElasticNetwork& net, const NetworkPass<T>& pass);

/// Probabilities of every exit, shape (N, C) each.
std::vector<Tensor<float>> forward_all_exits(ElasticNetwork& net, const Tensor<float>& batch,
                                             Mode mode = Mode::eval,
                                             std::mt19937_64* dropout_rng = nullptr);

struct Prediction {
  std::size_t label = 0;
  std::vector<float> probabilities;
};

/// Evaluates only the graph prefix feeding `exit`. `input` is one sample
/// (H, W, C) or a batch of one.
Prediction predict(ElasticNetwork& net, const Tensor<float>& input, std::size_t exit,
                   const std::function<void(NodeId)>& on_node = {});

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const float> values);

extern template NetworkPass<float> run_network(ElasticNetwork&, const Tensor<float>&,
                                               const RunOptions&);
extern template NetworkPass<double> run_network(ElasticNetwork&, const Tensor<double>&,
                                                const RunOptions&);
extern template void update_moving_statistics(ElasticNetwork&, const NetworkPass<float>&);
extern template void update_moving_statistics(ElasticNetwork&, const NetworkPass<double>&);

}  // namespace elastic

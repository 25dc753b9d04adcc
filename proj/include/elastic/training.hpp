#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "elastic/dataset.hpp"
#include "elastic/loss.hpp"
#include "elastic/network.hpp"
#include "elastic/optimizer.hpp"

namespace elastic {

struct TrainConfig {
  std::size_t phase1_epochs = 10;
  std::size_t phase2_epochs = 100;
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t patience = 10;
  double factor = 10.0;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, counted across both phases
  int phase = 1;
  double lr = 0.0;        // rate used during the epoch
  std::vector<double> train_loss;
  double train_loss_total = 0.0;
  std::vector<double> val_loss;
  double val_loss_total = 0.0;
  std::vector<double> val_error;
};

struct MetricsLog {
  std::vector<EpochRecord> records;
  bool halted = false;
  std::string diagnostic;
};

/// Per-exit mean loss, weighted total and error rate over a dataset.
struct Evaluation {
  std::vector<double> loss;
  double total = 0.0;
  std::vector<double> error;
};

Evaluation evaluate_full(ElasticNetwork& net, const Dataset& data, const LossConfig& loss,
                         std::size_t batch_size = 128);

/// Per-exit error rates in [0, 1]; argmax ties go to the lowest class.
std::vector<double> evaluate(ElasticNetwork& net, const Dataset& data, std::size_t batch_size = 128);

/// Replaces the validation pass of a phase-2 epoch (1-based within phase 2).
using ValidationHook = std::function<Evaluation(ElasticNetwork&, std::size_t epoch)>;

struct StepResult {
  std::vector<double> exit_losses;
  double total = 0.0;
};

/// One SGD step on a batch. `backbone_trainable` false freezes the backbone
/// and runs its batch norms on the moving statistics.
StepResult train_step(ElasticNetwork& net, const Tensor<float>& batch, const std::vector<int>& labels,
                      const LossConfig& loss, bool backbone_trainable, OptimizerState<float>& state,
                      double lr, double momentum, std::mt19937_64& dropout_rng);

/// Heads only, constant rate, backbone untouched.
MetricsLog train_phase1(ElasticNetwork& net, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, const LossConfig& loss);

/// Everything trainable, plateau decay on the validation total loss.
MetricsLog train_phase2(ElasticNetwork& net, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, const LossConfig& loss,
                        std::size_t epoch_offset = 0, const ValidationHook& hook = {});

}  // namespace elastic

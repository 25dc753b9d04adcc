#include "elastic/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "elastic/kernels.hpp"

namespace elastic {
namespace {

struct EpochTotals {
  std::vector<double> loss;
  double total = 0.0;
};

EpochTotals run_epoch(ElasticNetwork& net, const Dataset& train, const LossConfig& loss,
                      bool backbone_trainable, OptimizerState<float>& state, double lr,
                      const TrainConfig& config, std::mt19937_64& shuffle_rng,
                      std::mt19937_64& dropout_rng) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  EpochTotals totals;
  totals.loss.assign(net.exit_count(), 0.0);
  const std::span<const std::size_t> all(order);
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const auto idx = all.subspan(start, std::min(config.batch_size, order.size() - start));
    const auto step = train_step(net, gather_batch(train, idx), gather_labels(train, idx), loss,
                                 backbone_trainable, state, lr, config.momentum, dropout_rng);
    const double n = static_cast<double>(idx.size());
    for (std::size_t i = 0; i < totals.loss.size(); ++i) totals.loss[i] += step.exit_losses[i] * n;
    totals.total += step.total * n;
  }
  const double n = static_cast<double>(train.size());
  for (auto& l : totals.loss) l /= n;
  totals.total /= n;
  return totals;
}

void check_inputs(const ElasticNetwork& net, const Dataset& train, const LossConfig& loss,
                  const TrainConfig& config) {
  config.validate();
  loss.validate(net.exit_count());
  if (train.size() == 0) throw ConfigError("training set is empty");
  if (train.classes != net.classes()) {
    throw ConfigError("dataset has " + std::to_string(train.classes) + " classes, network " +
                      std::to_string(net.classes()));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (patience < 1) throw ConfigError("plateau patience must be >= 1");
  if (!(factor > 1.0)) throw ConfigError("plateau factor must exceed 1");
  if (!(min_delta >= 0.0)) throw ConfigError("min-improvement must be >= 0");
}

StepResult train_step(ElasticNetwork& net, const Tensor<float>& batch, const std::vector<int>& labels,
                      const LossConfig& loss, bool backbone_trainable, OptimizerState<float>& state,
                      double lr, double momentum, std::mt19937_64& dropout_rng) {
  RunOptions options;
  options.mode = Mode::train;
  options.backbone_trainable = backbone_trainable;
  options.dropout_rng = &dropout_rng;
  auto pass = run_network(net, batch, options);
  auto& tape = pass.tape;

  const double scale = loss.scale(net.classes());
  std::vector<SlotId> losses;
  for (SlotId logits : pass.logits) {
    losses.push_back(tape.emplace<SoftmaxLogLossOp<float>>({logits}, labels, scale));
  }
  const SlotId total = tape.emplace<WeightedSumOp<float>>(losses, loss.weights);

  StepResult result;
  for (SlotId s : losses) result.exit_losses.push_back(tape.value(s)[0]);
  result.total = tape.value(total)[0];
  if (!std::isfinite(result.total)) {
    throw NumericError("non-finite training loss " + std::to_string(result.total));
  }

  const auto grads = tape.backward(total, Tensor<float>::scalar(1.0f));
  auto refs = net.parameters();
  std::vector<Tensor<float>*> params(refs.size());
  std::vector<const Tensor<float>*> grad_ptrs(refs.size(), nullptr);
  std::vector<Tensor<float>> grad_values;
  grad_values.reserve(pass.param_slots.size());
  for (std::size_t k = 0; k < refs.size(); ++k) params[k] = &*refs[k].param->value;
  for (const auto& [index, slot] : pass.param_slots) {
    grad_values.push_back(grads.get_or_zero(slot, params[index]->shape()));
    grad_ptrs[index] = &grad_values.back();
  }
  sgd_momentum_step<float>(params, grad_ptrs, state, lr, momentum);
  update_moving_statistics(net, pass);
  return result;
}

Evaluation evaluate_full(ElasticNetwork& net, const Dataset& data, const LossConfig& loss,
                         std::size_t batch_size) {
  if (data.size() == 0) throw ContractViolation("cannot evaluate on an empty dataset");
  if (batch_size < 1) throw ContractViolation("batch size must be >= 1");
  const std::size_t exits = net.exit_count();
  const std::size_t classes = net.classes();
  Evaluation ev;
  ev.loss.assign(exits, 0.0);
  ev.error.assign(exits, 0.0);
  std::vector<std::size_t> idx;
  std::vector<double> row(classes);
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto probs = forward_all_exits(net, gather_batch(data, idx));
    for (std::size_t e = 0; e < exits; ++e) {
      const float* p = probs[e].raw();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::span<const float> r(p + k * classes, classes);
        const auto label = static_cast<std::size_t>(data.labels[idx[k]]);
        std::copy(r.begin(), r.end(), row.begin());
        ev.loss[e] += exit_loss(row, label, loss.class_scaled_loss);
        if (argmax(r) != label) ev.error[e] += 1.0;
      }
    }
  }
  const double n = static_cast<double>(data.size());
  for (std::size_t e = 0; e < exits; ++e) {
    ev.loss[e] /= n;
    ev.error[e] /= n;
  }
  ev.total = total_loss(ev.loss, loss.weights.empty() ? net.loss_weights() : loss.weights);
  return ev;
}

std::vector<double> evaluate(ElasticNetwork& net, const Dataset& data, std::size_t batch_size) {
  return evaluate_full(net, data, LossConfig{net.loss_weights()}, batch_size).error;
}

MetricsLog train_phase1(ElasticNetwork& net, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, const LossConfig& loss) {
  check_inputs(net, train, loss, config);
  MetricsLog log;
  auto shuffle_rng = substream(config.seed, "shuffle/phase1");
  auto dropout_rng = substream(config.seed, "dropout/phase1");
  OptimizerState<float> state;
  for (std::size_t epoch = 1; epoch <= config.phase1_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = 1;
    rec.lr = config.lr;
    try {
      const auto t = run_epoch(net, train, loss, false, state, config.lr, config, shuffle_rng,
                               dropout_rng);
      rec.train_loss = t.loss;
      rec.train_loss_total = t.total;
    } catch (const NumericError& e) {
      log.halted = true;
      log.diagnostic = "phase 1 epoch " + std::to_string(epoch) + ": " + e.what();
      return log;
    }
    const auto ev = evaluate_full(net, val, loss);
    rec.val_loss = ev.loss;
    rec.val_loss_total = ev.total;
    rec.val_error = ev.error;
    log.records.push_back(std::move(rec));
  }
  return log;
}

MetricsLog train_phase2(ElasticNetwork& net, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, const LossConfig& loss, std::size_t epoch_offset,
                        const ValidationHook& hook) {
  check_inputs(net, train, loss, config);
  MetricsLog log;
  auto shuffle_rng = substream(config.seed, "shuffle/phase2");
  auto dropout_rng = substream(config.seed, "dropout/phase2");
  OptimizerState<float> state;
  PlateauScheduler scheduler(config.lr, config.patience, config.factor, config.min_delta);
  for (std::size_t epoch = 1; epoch <= config.phase2_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch_offset + epoch;
    rec.phase = 2;
    rec.lr = scheduler.lr();
    try {
      const auto t = run_epoch(net, train, loss, true, state, rec.lr, config, shuffle_rng,
                               dropout_rng);
      rec.train_loss = t.loss;
      rec.train_loss_total = t.total;
    } catch (const NumericError& e) {
      log.halted = true;
      log.diagnostic = "phase 2 epoch " + std::to_string(epoch) + ": " + e.what();
      return log;
    }
    const auto ev = hook ? hook(net, epoch) : evaluate_full(net, val, loss);
    rec.val_loss = ev.loss;
    rec.val_loss_total = ev.total;
    rec.val_error = ev.error;
    log.records.push_back(std::move(rec));
    if (!std::isfinite(ev.total)) {
      log.halted = true;
      log.diagnostic = "phase 2 epoch " + std::to_string(epoch) + ": non-finite validation loss";
      return log;
    }
    scheduler.observe(ev.total);
  }
  return log;
}

}  // namespace elastic

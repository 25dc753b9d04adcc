#include "elastic/autodiff.hpp"

#include <string>

namespace elastic {

template <typename T>
const Tensor<T>& GradientStore<T>::at(SlotId slot) const {
  if (!has(slot)) throw UnknownSlotError("no gradient recorded for slot " + std::to_string(slot));
  return *grads_[slot];
}

template <typename T>
Tensor<T> GradientStore<T>::get_or_zero(SlotId slot, const Shape& shape) const {
  if (has(slot)) return *grads_[slot];
  return Tensor<T>(shape);
}

template <typename T>
void Tape<T>::check_slot(SlotId slot) const {
  if (slot >= values_.size()) {
    throw UnknownSlotError("slot " + std::to_string(slot) + " is not on the tape (" +
                           std::to_string(values_.size()) + " slots)");
  }
}

template <typename T>
SlotId Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  values_.push_back(std::move(value));
  requires_grad_.push_back(requires_grad);
  is_leaf_.push_back(true);
  return values_.size() - 1;
}

template <typename T>
SlotId Tape<T>::apply(std::shared_ptr<Op<T>> op, std::vector<SlotId> inputs) {
  std::vector<const Tensor<T>*> args;
  args.reserve(inputs.size());
  bool needs_grad = false;
  for (SlotId s : inputs) {
    check_slot(s);
    args.push_back(&values_[s]);
    needs_grad = needs_grad || requires_grad_[s];
  }
  Tensor<T> out = op->forward(args);
#ifndef NDEBUG
  bool inputs_finite = true;
  for (const auto* a : args) inputs_finite = inputs_finite && all_finite(*a);
  if (inputs_finite && !all_finite(out)) {
    throw NumericError("non-finite output from op '" + std::string(op->name()) + "'");
  }
#endif
  values_.push_back(std::move(out));
  requires_grad_.push_back(needs_grad);
  is_leaf_.push_back(false);
  const SlotId slot = values_.size() - 1;
  nodes_.push_back(Node{std::move(op), std::move(inputs), slot});
  return slot;
}

template <typename T>
const Tensor<T>& Tape<T>::value(SlotId slot) const {
  check_slot(slot);
  return values_[slot];
}

template <typename T>
bool Tape<T>::requires_grad(SlotId slot) const {
  check_slot(slot);
  return requires_grad_[slot];
}

template <typename T>
bool Tape<T>::replay_matches() {
  std::vector<Tensor<T>> replayed = values_;
  for (auto& node : nodes_) {
    std::vector<const Tensor<T>*> args;
    for (SlotId s : node.inputs) args.push_back(&replayed[s]);
    replayed[node.output] = node.op->forward(args);
  }
  for (const auto& node : nodes_) {
    if (!(replayed[node.output] == values_[node.output])) return false;
  }
  return true;
}

template <typename T>
GradientStore<T> Tape<T>::backward(std::span<const std::pair<SlotId, Tensor<T>>> seeds) const {
  std::vector<std::optional<Tensor<T>>> grads(values_.size());
  for (const auto& [slot, seed] : seeds) {
    check_slot(slot);
    if (seed.shape() != values_[slot].shape()) {
      throw ContractViolation("seed shape " + shape_string(seed.shape()) + " does not match slot " +
                              std::to_string(slot) + " of shape " +
                              shape_string(values_[slot].shape()));
    }
    if (grads[slot]) {
      accumulate(*grads[slot], seed);
    } else {
      grads[slot] = seed;
    }
  }

  std::vector<const Tensor<T>*> args;
  std::vector<Tensor<T>*> grad_args;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const Node& node = *it;
    if (!requires_grad_[node.output] || !grads[node.output]) continue;
    args.clear();
    grad_args.clear();
    for (SlotId s : node.inputs) {
      args.push_back(&values_[s]);
      if (requires_grad_[s]) {
        if (!grads[s]) grads[s].emplace(values_[s].shape());
        grad_args.push_back(&*grads[s]);
      } else {
        grad_args.push_back(nullptr);
      }
    }
    node.op->backward(args, values_[node.output], *grads[node.output], grad_args);
  }
  return GradientStore<T>(std::move(grads));
}

template class GradientStore<float>;
template class GradientStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace elastic

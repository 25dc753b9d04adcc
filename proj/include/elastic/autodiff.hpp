#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "elastic/tensor.hpp"

namespace elastic {

/// Index of a value recorded on a tape.
using SlotId = std::size_t;

/// A differentiable operation. `forward` may stash context it needs for
/// `backward` (argmax positions, batch statistics); calling it again on the
/// same inputs must reproduce the same output bit for bit.
template <typename T>
class Op {
 public:
  virtual ~Op() = default;

  virtual std::string_view name() const = 0;

  virtual Tensor<T> forward(std::span<const Tensor<T>* const> inputs) = 0;

  /// Adds d(loss)/d(input_k) into `grad_inputs[k]`. Entries are null for
  /// inputs that do not need a gradient.
  virtual void backward(std::span<const Tensor<T>* const> inputs, const Tensor<T>& output,
                        const Tensor<T>& grad_output, std::span<Tensor<T>* const> grad_inputs) = 0;
};

/// Gradients produced by one backward pass, keyed by slot.
template <typename T>
class GradientStore {
 public:
  GradientStore() = default;
  explicit GradientStore(std::vector<std::optional<Tensor<T>>> grads) : grads_(std::move(grads)) {}

  /// False when no gradient reached the slot (it is then identically zero).
  bool has(SlotId slot) const { return slot < grads_.size() && grads_[slot].has_value(); }

  const Tensor<T>& at(SlotId slot) const;

  /// Gradient of `slot`, or zeros of `shape` if nothing flowed into it.
  Tensor<T> get_or_zero(SlotId slot, const Shape& shape) const;

  std::size_t slot_count() const { return grads_.size(); }

 private:
  std::vector<std::optional<Tensor<T>>> grads_;
};

/// Records forward computation so gradients can be pulled back through it.
///
/// Values live in slots. Leaves are created with `leaf`, every other slot is
/// the output of exactly one recorded node, so node order is a topological
/// order by construction. Backward visits nodes in reverse recording order,
/// which fixes the gradient accumulation order.
template <typename T>
class Tape {
 public:
  struct Node {
    std::shared_ptr<Op<T>> op;
    std::vector<SlotId> inputs;
    SlotId output;
  };

  SlotId leaf(Tensor<T> value, bool requires_grad = false);

  /// Runs `op` on the given slots and records it.
  SlotId apply(std::shared_ptr<Op<T>> op, std::vector<SlotId> inputs);

  template <typename OpType, typename... Args>
  SlotId emplace(std::vector<SlotId> inputs, Args&&... args) {
    return apply(std::make_shared<OpType>(std::forward<Args>(args)...), std::move(inputs));
  }

  const Tensor<T>& value(SlotId slot) const;
  bool requires_grad(SlotId slot) const;
  std::size_t slot_count() const noexcept { return values_.size(); }
  std::span<const Node> nodes() const noexcept { return nodes_; }

  /// Re-executes every node from the recorded leaves and reports whether
  /// all outputs came out bitwise identical.
  bool replay_matches();

  /// Reverse-mode sweep seeded by (slot, d loss / d slot) pairs. Multiple
  /// seeds and fan-out contributions are summed.
  GradientStore<T> backward(std::span<const std::pair<SlotId, Tensor<T>>> seeds) const;

  GradientStore<T> backward(SlotId slot, Tensor<T> seed) const {
    std::pair<SlotId, Tensor<T>> one{slot, std::move(seed)};
    return backward(std::span<const std::pair<SlotId, Tensor<T>>>(&one, 1));
  }

 private:
  void check_slot(SlotId slot) const;

  std::vector<Tensor<T>> values_;
  std::vector<bool> requires_grad_;
  std::vector<bool> is_leaf_;
  std::vector<Node> nodes_;
};

extern template class GradientStore<float>;
extern template class GradientStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace elastic

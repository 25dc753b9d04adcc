#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elastic/tensor.hpp"

namespace elastic {

/// Velocity per parameter position, created as zeros on first use.
template <typename T>
struct OptimizerState {
  std::vector<std::optional<Tensor<T>>> velocity;
};

/// v <- mu v - lr g; w <- w + v. A null gradient marks a frozen parameter,
/// which is left alone. Any non-finite gradient aborts the whole step
/// before anything is modified.
template <typename T>
void sgd_momentum_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                       OptimizerState<T>& state, double lr, double momentum) {
  if (params.size() != grads.size()) throw ContractViolation("sgd: params and grads differ in count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k]) continue;
    if (grads[k]->shape() != params[k]->shape()) {
      throw ContractViolation("sgd: gradient " + std::to_string(k) + " has shape " +
                              shape_string(grads[k]->shape()) + ", parameter " +
                              shape_string(params[k]->shape()));
    }
    if (!all_finite(*grads[k])) {
      throw NumericError("sgd: non-finite gradient for parameter " + std::to_string(k) +
                         "; step aborted");
    }
  }
  if (state.velocity.size() < params.size()) state.velocity.resize(params.size());
  const T mu = static_cast<T>(momentum);
  const T eta = static_cast<T>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k]) continue;
    auto& v = state.velocity[k];
    if (!v) v.emplace(params[k]->shape());
    if (v->shape() != params[k]->shape()) throw ContractViolation("sgd: velocity shape changed");
    T* w = params[k]->raw();
    T* vel = v->raw();
    const T* g = grads[k]->raw();
    for (std::size_t i = 0; i < v->size(); ++i) {
      vel[i] = mu * vel[i] - eta * g[i];
      w[i] += vel[i];
    }
  }
}

/// Divides the learning rate by `factor` once the monitored value has gone
/// `patience` observations without beating the best by more than
/// `min_delta`. The first observation always counts as an improvement.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience, double factor, double min_delta)
      : lr_(lr), patience_(patience), factor_(factor), min_delta_(min_delta) {}

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t wait() const { return wait_; }

  /// Returns true when this observation triggered a reduction.
  bool observe(double value) {
    if (best_ - value > min_delta_) {
      best_ = value;
      wait_ = 0;
      return false;
    }
    if (++wait_ >= patience_) {
      lr_ /= factor_;
      wait_ = 0;
      return true;
    }
    return false;
  }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

}  // namespace elastic

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace elastic {

/// Max-shifted softmax of one logit vector.
std::vector<double> softmax(std::span<const double> z);

/// -(1/C) log p_true, or -log p_true when `class_scaled` is false. p_true is
/// clamped to machine epsilon first; `clamped` reports whether that fired.
double exit_loss(std::span<const double> probabilities, std::size_t label, bool class_scaled = true,
                 bool* clamped = nullptr);

/// sum_i w_i L_i. Throws ContractViolation on a length mismatch.
double total_loss(std::span<const double> exit_losses, std::span<const double> weights);

/// Per-exit weights plus the 1/C switch.
struct LossConfig {
  std::vector<double> weights;
  bool class_scaled_loss = true;

  static LossConfig uniform(std::size_t exits) { return LossConfig{std::vector<double>(exits, 1.0)}; }

  /// Length must match, weights nonnegative, at least one positive.
  void validate(std::size_t exits) const;
  double scale(std::size_t classes) const {
    return class_scaled_loss ? 1.0 / static_cast<double>(classes) : 1.0;
  }
};

}  // namespace elastic

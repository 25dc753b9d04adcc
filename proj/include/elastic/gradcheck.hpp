#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "elastic/autodiff.hpp"

namespace elastic {

/// Records the operation under test on `tape`, reading the given input
/// slots, and returns its output slot. Must be deterministic.
using TapeBuilder = std::function<SlotId(Tape<double>&, std::span<const SlotId>)>;

struct GradCheckOptions {
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  /// Indices of inputs treated as constants (never perturbed).
  std::vector<std::size_t> constant_inputs;
};

struct ExcludedCoordinate {
  std::size_t input = 0;
  std::size_t index = 0;
};

struct GradCheckResult {
  /// max over checked coordinates of |analytic - numeric| / max(1, |analytic|).
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates sitting on a kink (one-sided slopes disagree), reported
  /// rather than failed.
  std::vector<ExcludedCoordinate> excluded;
};

/// Compares reverse-mode gradients of <r, op(inputs)> against central
/// differences (f(x+eps) - f(x-eps)) / 2 eps, where r is a fixed random
/// projection of the output.
GradCheckResult finite_difference_check(const TapeBuilder& op, std::vector<Tensor<double>> inputs,
                                        const GradCheckOptions& options = {});

}  // namespace elastic

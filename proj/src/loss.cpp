#include "elastic/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "elastic/error.hpp"

namespace elastic {

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw ShapeError("softmax of an empty vector");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

double exit_loss(std::span<const double> probabilities, std::size_t label, bool class_scaled,
                 bool* clamped) {
  if (label >= probabilities.size()) {
    throw ContractViolation("label " + std::to_string(label) + " outside " +
                            std::to_string(probabilities.size()) + " classes");
  }
  constexpr double floor = std::numeric_limits<double>::epsilon();
  const double p = probabilities[label];
  if (clamped) *clamped = p < floor;
  const double scale = class_scaled ? 1.0 / static_cast<double>(probabilities.size()) : 1.0;
  // -0.0 would compare fine but prints badly; a perfect prediction gives 0.
  const double loss = -scale * std::log(std::max(p, floor));
  return loss == 0.0 ? 0.0 : loss;
}

double total_loss(std::span<const double> exit_losses, std::span<const double> weights) {
  if (exit_losses.size() != weights.size()) {
    throw ContractViolation("total_loss: " + std::to_string(exit_losses.size()) + " losses, " +
                            std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * exit_losses[i];
  return total;
}

void LossConfig::validate(std::size_t exits) const {
  if (weights.size() != exits) {
    throw ConfigError("loss weights: " + std::to_string(weights.size()) + " given for " +
                      std::to_string(exits) + " exits");
  }
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw ConfigError("at least one loss weight must be positive");
}

}  // namespace elastic

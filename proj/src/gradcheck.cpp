#include "elastic/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace elastic {
namespace {

struct Evaluation {
  Tape<double> tape;
  std::vector<SlotId> input_slots;
  SlotId output = 0;
};

Evaluation evaluate(const TapeBuilder& op, const std::vector<Tensor<double>>& inputs,
                    const std::vector<bool>& constant) {
  Evaluation e;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    e.input_slots.push_back(e.tape.leaf(inputs[k], !constant[k]));
  }
  e.output = op(e.tape, e.input_slots);
  return e;
}

double project(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace

GradCheckResult finite_difference_check(const TapeBuilder& op, std::vector<Tensor<double>> inputs,
                                        const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
  for (const auto& t : inputs) {
    if (!all_finite(t)) throw ContractViolation("gradient check inputs must be finite");
  }
  std::vector<bool> constant(inputs.size(), false);
  for (auto k : options.constant_inputs) constant.at(k) = true;

  Evaluation base = evaluate(op, inputs, constant);
  const Tensor<double>& y0 = base.tape.value(base.output);
  Tensor<double> projection(y0.shape());
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : projection.data()) v = normal(rng);

  const GradientStore<double> grads = base.tape.backward(base.output, projection);
  const double f0 = project(y0, projection);
  const double eps = options.epsilon;

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (constant[k]) continue;
    const Tensor<double> analytic = grads.get_or_zero(base.input_slots[k], inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double original = inputs[k][i];
      inputs[k][i] = original + eps;
      Evaluation up = evaluate(op, inputs, constant);
      const double f_up = project(up.tape.value(up.output), projection);
      inputs[k][i] = original - eps;
      Evaluation down = evaluate(op, inputs, constant);
      const double f_down = project(down.tape.value(down.output), projection);
      inputs[k][i] = original;

      const double forward_slope = (f_up - f0) / eps;
      const double backward_slope = (f0 - f_down) / eps;
      const double central = (f_up - f_down) / (2.0 * eps);
      if (std::abs(forward_slope - backward_slope) > 1e-3 * std::max(1.0, std::abs(central))) {
        result.excluded.push_back({k, i});
        continue;
      }
      const double a = analytic[i];
      const double err = std::abs(a - central) / std::max(1.0, std::abs(a));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace elastic

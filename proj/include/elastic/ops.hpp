#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "elastic/autodiff.hpp"
#include "elastic/kernels.hpp"

// Differentiable operations recorded on a Tape, plus thin helpers that
// create and apply them.

namespace elastic {

template <typename T>
using TensorArgs = std::span<const Tensor<T>* const>;
template <typename T>
using GradArgs = std::span<Tensor<T>* const>;

template <typename T>
class IdentityOp final : public Op<T> {
 public:
  std::string_view name() const override { return "identity"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// Elementwise product of two equally shaped tensors.
template <typename T>
class MulOp final : public Op<T> {
 public:
  std::string_view name() const override { return "mul"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// Elementwise sum of any number of equally shaped tensors.
template <typename T>
class AddOp final : public Op<T> {
 public:
  std::string_view name() const override { return "add"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// max(0, x); the derivative at exactly 0 is taken as 0.
template <typename T>
class ReluOp final : public Op<T> {
 public:
  std::string_view name() const override { return "relu"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// Inputs: x, kernel[, bias].
template <typename T>
class Conv2dOp final : public Op<T> {
 public:
  Conv2dOp(std::size_t stride, Padding padding) : stride_(stride), padding_(padding) {}
  std::string_view name() const override { return "conv2d"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::size_t stride_;
  Padding padding_;
};

/// Inputs: x, kernel[, bias].
template <typename T>
class DepthwiseConv2dOp final : public Op<T> {
 public:
  DepthwiseConv2dOp(std::size_t stride, Padding padding) : stride_(stride), padding_(padding) {}
  std::string_view name() const override { return "depthwise_conv2d"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::size_t stride_;
  Padding padding_;
};

/// Inputs: x (N, F), weight (F, C)[, bias (C)].
template <typename T>
class DenseOp final : public Op<T> {
 public:
  std::string_view name() const override { return "dense"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

template <typename T>
class MaxPoolOp final : public Op<T> {
 public:
  MaxPoolOp(std::size_t size, std::size_t stride, Padding padding)
      : size_(size), stride_(stride), padding_(padding) {}
  std::string_view name() const override { return "max_pool2d"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::size_t size_, stride_;
  Padding padding_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class AvgPoolOp final : public Op<T> {
 public:
  AvgPoolOp(std::size_t size, std::size_t stride, Padding padding)
      : size_(size), stride_(stride), padding_(padding) {}
  std::string_view name() const override { return "avg_pool2d"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::size_t size_, stride_;
  Padding padding_;
};

template <typename T>
class GlobalAvgPoolOp final : public Op<T> {
 public:
  std::string_view name() const override { return "global_avg_pool"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

template <typename T>
class ConcatOp final : public Op<T> {
 public:
  std::string_view name() const override { return "concat"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// Training-mode batch norm. Inputs: x, gamma, beta. Normalizes with the
/// batch statistics, which stay readable for the moving-average update.
template <typename T>
class BatchNormTrainOp final : public Op<T> {
 public:
  explicit BatchNormTrainOp(double eps) : eps_(eps) {}
  std::string_view name() const override { return "batch_norm_train"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

  const std::vector<T>& batch_mean() const { return mean_; }
  const std::vector<T>& batch_var() const { return var_; }

 private:
  double eps_;
  std::vector<T> mean_, var_;
};

/// Inference-mode batch norm. Inputs: x, gamma, beta, mean, variance.
template <typename T>
class BatchNormInferOp final : public Op<T> {
 public:
  explicit BatchNormInferOp(double eps) : eps_(eps) {}
  std::string_view name() const override { return "batch_norm_infer"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  double eps_;
};

/// Inverted dropout with a mask fixed at construction, so the op replays
/// identically.
template <typename T>
class DropoutOp final : public Op<T> {
 public:
  /// Throws ContractViolation unless 0 <= rate < 1.
  DropoutOp(double rate, const Shape& shape, std::mt19937_64& rng);
  std::string_view name() const override { return "dropout"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

  const Tensor<T>& mask() const { return mask_; }

 private:
  Tensor<T> mask_;
};

template <typename T>
class SoftmaxOp final : public Op<T> {
 public:
  std::string_view name() const override { return "softmax"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;
};

/// Batch mean of -scale * log(max(p_true, floor)) over probability rows.
template <typename T>
class ExitLossOp final : public Op<T> {
 public:
  ExitLossOp(std::vector<int> labels, double scale, double floor);
  std::string_view name() const override { return "exit_loss"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::vector<int> labels_;
  double scale_, floor_;
};

/// Softmax followed by the scaled log loss, fused on the logits. Equal to
/// SoftmaxOp + ExitLossOp whenever p_true stays above the floor.
template <typename T>
class SoftmaxLogLossOp final : public Op<T> {
 public:
  SoftmaxLogLossOp(std::vector<int> labels, double scale);
  std::string_view name() const override { return "softmax_log_loss"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::vector<int> labels_;
  double scale_;
  Tensor<T> probs_;
};

/// sum_i w_i * x_i over scalar inputs.
template <typename T>
class WeightedSumOp final : public Op<T> {
 public:
  explicit WeightedSumOp(std::vector<double> weights) : weights_(std::move(weights)) {}
  std::string_view name() const override { return "weighted_sum"; }
  Tensor<T> forward(TensorArgs<T> in) override;
  void backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) override;

 private:
  std::vector<double> weights_;
};

#define ELASTIC_DECLARE_OPS(T)               \
  extern template class IdentityOp<T>;       \
  extern template class MulOp<T>;            \
  extern template class AddOp<T>;            \
  extern template class ReluOp<T>;           \
  extern template class Conv2dOp<T>;         \
  extern template class DepthwiseConv2dOp<T>;\
  extern template class DenseOp<T>;          \
  extern template class MaxPoolOp<T>;        \
  extern template class AvgPoolOp<T>;        \
  extern template class GlobalAvgPoolOp<T>;  \
  extern template class ConcatOp<T>;         \
  extern template class BatchNormTrainOp<T>; \
  extern template class BatchNormInferOp<T>; \
  extern template class DropoutOp<T>;        \
  extern template class SoftmaxOp<T>;        \
  extern template class ExitLossOp<T>;       \
  extern template class SoftmaxLogLossOp<T>; \
  extern template class WeightedSumOp<T>;

ELASTIC_DECLARE_OPS(float)
ELASTIC_DECLARE_OPS(double)
#undef ELASTIC_DECLARE_OPS

}  // namespace elastic

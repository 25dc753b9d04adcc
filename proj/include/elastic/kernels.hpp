#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "elastic/tensor.hpp"

// Raw NHWC layer kernels. Forward functions return fresh tensors; backward
// functions *add* into whichever gradient outputs are non-null.

namespace elastic {

enum class Padding { same, valid };

/// Output extent and leading pad along one spatial axis.
struct AxisPlan {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

/// Same padding: out = ceil(in / stride), the odd pad element goes after.
/// Valid padding: out = floor((in - kernel) / stride) + 1.
AxisPlan plan_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

namespace kernels {

// -- convolution ------------------------------------------------------------
// x: (N, H, W, Cin), w: (K, K, Cin, Cout), bias: (Cout) or null.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, std::size_t stride,
                 Padding padding);
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, std::size_t stride,
                     Padding padding, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gbias);

// x: (N, H, W, C), w: (K, K, C), bias: (C) or null.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                           std::size_t stride, Padding padding);
template <typename T>
void depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                               std::size_t stride, Padding padding, Tensor<T>* gx, Tensor<T>* gw,
                               Tensor<T>* gbias);

// -- fully connected --------------------------------------------------------
// x: (N, F), w: (F, C), bias: (C) or null -> (N, C).
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias);
template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx,
                    Tensor<T>* gw, Tensor<T>* gbias);

// -- pooling ----------------------------------------------------------------
/// Max pooling; `argmax` receives the flat input index feeding each output.
/// Ties go to the first position in row-major window order; padded
/// positions never win.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t size, std::size_t stride, Padding padding,
                     std::vector<std::size_t>* argmax);
template <typename T>
void max_pool2d_backward(const Tensor<T>& gy, std::span<const std::size_t> argmax, Tensor<T>& gx);

/// Average pooling over the in-bounds part of each window.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t size, std::size_t stride, Padding padding);
template <typename T>
void avg_pool2d_backward(const Tensor<T>& gy, const Shape& x_shape, std::size_t size,
                         std::size_t stride, Padding padding, Tensor<T>& gx);

/// (N, H, W, C) -> (N, C) spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
void global_avg_pool_backward(const Tensor<T>& gy, Tensor<T>& gx);

// -- batch normalization ----------------------------------------------------
/// Per-channel statistics over every axis but the last.
template <typename T>
void channel_moments(const Tensor<T>& x, std::vector<T>& mean, std::vector<T>& var);

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, channel is the last axis.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                     std::span<const T> mean, std::span<const T> var, double eps);

// -- misc -------------------------------------------------------------------
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Concatenate along the last (channel) axis; all leading extents must match.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

/// Row-wise max-shifted softmax over the last axis.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace kernels
}  // namespace elastic

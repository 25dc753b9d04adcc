#include "elastic/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace elastic {
namespace {

template <typename T>
void require_inputs(TensorArgs<T> in, std::size_t lo, std::size_t hi, std::string_view op) {
  if (in.size() < lo || in.size() > hi) {
    throw ContractViolation(std::string(op) + ": unexpected input count " + std::to_string(in.size()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void check_labels(const std::vector<int>& labels, std::size_t rows, std::size_t classes,
                  std::string_view op) {
  if (labels.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractViolation(std::string(op) + ": label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

// -- identity / mul / add -----------------------------------------------------

template <typename T>
Tensor<T> IdentityOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return *in[0];
}

template <typename T>
void IdentityOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (gin[0]) accumulate(*gin[0], g);
}

template <typename T>
Tensor<T> MulOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 2, 2, name());
  require_same_shape(*in[0], *in[1], name());
  Tensor<T> y(in[0]->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*in[0])[i] * (*in[1])[i];
  return y;
}

template <typename T>
void MulOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  for (std::size_t k = 0; k < 2; ++k) {
    if (!gin[k]) continue;
    const Tensor<T>& other = *in[1 - k];
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[k])[i] += g[i] * other[i];
  }
}

template <typename T>
Tensor<T> AddOp<T>::forward(TensorArgs<T> in) {
  if (in.empty()) throw ContractViolation("add of zero tensors");
  Tensor<T> y = *in[0];
  for (std::size_t k = 1; k < in.size(); ++k) {
    require_same_shape(*in[0], *in[k], name());
    accumulate(y, *in[k]);
  }
  return y;
}

template <typename T>
void AddOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  for (auto* gk : gin) {
    if (gk) accumulate(*gk, g);
  }
}

// -- relu -------------------------------------------------------------------

template <typename T>
Tensor<T> ReluOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return kernels::relu(*in[0]);
}

template <typename T>
void ReluOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (!gin[0]) return;
  const Tensor<T>& x = *in[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > T{0}) (*gin[0])[i] += g[i];
  }
}

// -- convolutions / dense ----------------------------------------------------

template <typename T>
Tensor<T> Conv2dOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 2, 3, name());
  return kernels::conv2d(*in[0], *in[1], in.size() == 3 ? in[2] : nullptr, stride_, padding_);
}

template <typename T>
void Conv2dOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  kernels::conv2d_backward(*in[0], *in[1], g, stride_, padding_, gin[0], gin[1],
                           in.size() == 3 ? gin[2] : nullptr);
}

template <typename T>
Tensor<T> DepthwiseConv2dOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 2, 3, name());
  return kernels::depthwise_conv2d(*in[0], *in[1], in.size() == 3 ? in[2] : nullptr, stride_,
                                   padding_);
}

template <typename T>
void DepthwiseConv2dOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g,
                                    GradArgs<T> gin) {
  kernels::depthwise_conv2d_backward(*in[0], *in[1], g, stride_, padding_, gin[0], gin[1],
                                     in.size() == 3 ? gin[2] : nullptr);
}

template <typename T>
Tensor<T> DenseOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 2, 3, name());
  return kernels::dense(*in[0], *in[1], in.size() == 3 ? in[2] : nullptr);
}

template <typename T>
void DenseOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  kernels::dense_backward(*in[0], *in[1], g, gin[0], gin[1], in.size() == 3 ? gin[2] : nullptr);
}

// -- pooling ----------------------------------------------------------------

template <typename T>
Tensor<T> MaxPoolOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return kernels::max_pool2d(*in[0], size_, stride_, padding_, &argmax_);
}

template <typename T>
void MaxPoolOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (gin[0]) kernels::max_pool2d_backward(g, std::span<const std::size_t>(argmax_), *gin[0]);
}

template <typename T>
Tensor<T> AvgPoolOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return kernels::avg_pool2d(*in[0], size_, stride_, padding_);
}

template <typename T>
void AvgPoolOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (gin[0]) kernels::avg_pool2d_backward(g, in[0]->shape(), size_, stride_, padding_, *gin[0]);
}

template <typename T>
Tensor<T> GlobalAvgPoolOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return kernels::global_avg_pool(*in[0]);
}

template <typename T>
void GlobalAvgPoolOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g,
                                  GradArgs<T> gin) {
  if (gin[0]) kernels::global_avg_pool_backward(g, *gin[0]);
}

template <typename T>
Tensor<T> ConcatOp<T>::forward(TensorArgs<T> in) {
  return kernels::concat_channels(in);
}

template <typename T>
void ConcatOp<T>::backward(TensorArgs<T> in, const Tensor<T>& out, const Tensor<T>& g,
                           GradArgs<T> gin) {
  const std::size_t total = out.shape().back();
  const std::size_t rows = out.size() / total;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t c = in[k]->shape().back();
    if (gin[k]) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* src = g.raw() + r * total + offset;
        T* dst = gin[k]->raw() + r * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
    offset += c;
  }
}

// -- batch norm ---------------------------------------------------------------

template <typename T>
Tensor<T> BatchNormTrainOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 3, 3, name());
  kernels::channel_moments(*in[0], mean_, var_);
  return kernels::batch_norm<T>(*in[0], in[1]->data(), in[2]->data(), mean_, var_, eps_);
}

template <typename T>
void BatchNormTrainOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g,
                                   GradArgs<T> gin) {
  const Tensor<T>& x = *in[0];
  const Tensor<T>& gamma = *in[1];
  const std::size_t c = x.shape().back();
  const std::size_t m = x.size() / c;
  std::vector<T> inv(c), sum_g(c, T{0}), sum_gx(c, T{0});
  for (std::size_t ch = 0; ch < c; ++ch) inv[ch] = T{1} / std::sqrt(var_[ch] + static_cast<T>(eps_));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T xhat = (x[i * c + ch] - mean_[ch]) * inv[ch];
      sum_g[ch] += g[i * c + ch];
      sum_gx[ch] += g[i * c + ch] * xhat;
    }
  }
  if (gin[1]) {
    for (std::size_t ch = 0; ch < c; ++ch) (*gin[1])[ch] += sum_gx[ch];
  }
  if (gin[2]) {
    for (std::size_t ch = 0; ch < c; ++ch) (*gin[2])[ch] += sum_g[ch];
  }
  if (gin[0]) {
    const T mt = static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T xhat = (x[i * c + ch] - mean_[ch]) * inv[ch];
        (*gin[0])[i * c + ch] +=
            gamma[ch] * inv[ch] / mt * (mt * g[i * c + ch] - sum_g[ch] - xhat * sum_gx[ch]);
      }
    }
  }
}

template <typename T>
Tensor<T> BatchNormInferOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 5, 5, name());
  return kernels::batch_norm<T>(*in[0], in[1]->data(), in[2]->data(), in[3]->data(), in[4]->data(),
                                eps_);
}

template <typename T>
void BatchNormInferOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g,
                                   GradArgs<T> gin) {
  const Tensor<T>& x = *in[0];
  const Tensor<T>& gamma = *in[1];
  const Tensor<T>& mean = *in[3];
  const Tensor<T>& var = *in[4];
  const std::size_t c = x.shape().back();
  const std::size_t m = x.size() / c;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T gi = g[i * c + ch];
      const T shifted = x[i * c + ch] - mean[ch];
      const T denom = var[ch] + static_cast<T>(eps_);
      const T inv = T{1} / std::sqrt(denom);
      if (gin[0]) (*gin[0])[i * c + ch] += gi * gamma[ch] * inv;
      if (gin[1]) (*gin[1])[ch] += gi * shifted * inv;
      if (gin[2]) (*gin[2])[ch] += gi;
      if (gin[3]) (*gin[3])[ch] -= gi * gamma[ch] * inv;
      if (gin[4]) (*gin[4])[ch] += gi * gamma[ch] * shifted * T{-0.5} * inv / denom;
    }
  }
}

// -- dropout ----------------------------------------------------------------

template <typename T>
DropoutOp<T>::DropoutOp(double rate, const Shape& shape, std::mt19937_64& rng) : mask_(shape) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractViolation("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  if (rate == 0.0) {
    mask_.fill(T{1});
    return;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : mask_.data()) m = unit(rng) >= rate ? keep_scale : T{0};
}

template <typename T>
Tensor<T> DropoutOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  require_same_shape(*in[0], mask_, name());
  Tensor<T> y(in[0]->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*in[0])[i] * mask_[i];
  return y;
}

template <typename T>
void DropoutOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (!gin[0]) return;
  for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * mask_[i];
}

// -- softmax and losses -------------------------------------------------------

template <typename T>
Tensor<T> SoftmaxOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  return kernels::softmax_rows(*in[0]);
}

template <typename T>
void SoftmaxOp<T>::backward(TensorArgs<T>, const Tensor<T>& out, const Tensor<T>& g, GradArgs<T> gin) {
  if (!gin[0]) return;
  const std::size_t c = out.shape().back();
  const std::size_t rows = out.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = out.raw() + r * c;
    const T* gr = g.raw() + r * c;
    T dot = 0;
    for (std::size_t j = 0; j < c; ++j) dot += gr[j] * p[j];
    T* dst = gin[0]->raw() + r * c;
    for (std::size_t j = 0; j < c; ++j) dst[j] += p[j] * (gr[j] - dot);
  }
}

template <typename T>
ExitLossOp<T>::ExitLossOp(std::vector<int> labels, double scale, double floor)
    : labels_(std::move(labels)), scale_(scale), floor_(floor) {}

template <typename T>
Tensor<T> ExitLossOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  const Tensor<T>& p = *in[0];
  const std::size_t c = p.shape().back();
  const std::size_t rows = p.size() / c;
  check_labels(labels_, rows, c, name());
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T pt = std::max(p[r * c + labels_[r]], static_cast<T>(floor_));
    total += -static_cast<T>(scale_) * std::log(pt);
  }
  return Tensor<T>::scalar(total / static_cast<T>(rows));
}

template <typename T>
void ExitLossOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g, GradArgs<T> gin) {
  if (!gin[0]) return;
  const Tensor<T>& p = *in[0];
  const std::size_t c = p.shape().back();
  const std::size_t rows = p.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t idx = r * c + labels_[r];
    if (p[idx] > static_cast<T>(floor_)) {
      (*gin[0])[idx] += g[0] * -static_cast<T>(scale_) / (static_cast<T>(rows) * p[idx]);
    }
  }
}

template <typename T>
SoftmaxLogLossOp<T>::SoftmaxLogLossOp(std::vector<int> labels, double scale)
    : labels_(std::move(labels)), scale_(scale) {}

template <typename T>
Tensor<T> SoftmaxLogLossOp<T>::forward(TensorArgs<T> in) {
  require_inputs(in, 1, 1, name());
  const Tensor<T>& z = *in[0];
  const std::size_t c = z.shape().back();
  const std::size_t rows = z.size() / c;
  check_labels(labels_, rows, c, name());
  probs_ = kernels::softmax_rows(z);
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z.raw() + r * c;
    const T top = *std::max_element(zr, zr + c);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(zr[j] - top);
    const T log_p = zr[labels_[r]] - top - std::log(sum);
    total += -static_cast<T>(scale_) * log_p;
  }
  return Tensor<T>::scalar(total / static_cast<T>(rows));
}

template <typename T>
void SoftmaxLogLossOp<T>::backward(TensorArgs<T>, const Tensor<T>&, const Tensor<T>& g,
                                   GradArgs<T> gin) {
  if (!gin[0]) return;
  const std::size_t c = probs_.shape().back();
  const std::size_t rows = probs_.size() / c;
  const T coef = g[0] * static_cast<T>(scale_) / static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = probs_.raw() + r * c;
    T* dst = gin[0]->raw() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      const T target = static_cast<int>(j) == labels_[r] ? T{1} : T{0};
      dst[j] += coef * (p[j] - target);
    }
  }
}

template <typename T>
Tensor<T> WeightedSumOp<T>::forward(TensorArgs<T> in) {
  if (in.size() != weights_.size()) {
    throw ContractViolation("weighted_sum: " + std::to_string(in.size()) + " terms for " +
                            std::to_string(weights_.size()) + " weights");
  }
  T total = 0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (in[k]->size() != 1) throw ShapeError("weighted_sum terms must be scalars");
    total += static_cast<T>(weights_[k]) * (*in[k])[0];
  }
  return Tensor<T>::scalar(total);
}

template <typename T>
void WeightedSumOp<T>::backward(TensorArgs<T> in, const Tensor<T>&, const Tensor<T>& g,
                                GradArgs<T> gin) {
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (gin[k]) (*gin[k])[0] += static_cast<T>(weights_[k]) * g[0];
  }
}

#define ELASTIC_INSTANTIATE_OPS(T)     \
  template class IdentityOp<T>;        \
  template class MulOp<T>;             \
  template class AddOp<T>;             \
  template class ReluOp<T>;            \
  template class Conv2dOp<T>;          \
  template class DepthwiseConv2dOp<T>; \
  template class DenseOp<T>;           \
  template class MaxPoolOp<T>;         \
  template class AvgPoolOp<T>;         \
  template class GlobalAvgPoolOp<T>;   \
  template class ConcatOp<T>;          \
  template class BatchNormTrainOp<T>;  \
  template class BatchNormInferOp<T>;  \
  template class DropoutOp<T>;         \
  template class SoftmaxOp<T>;         \
  template class ExitLossOp<T>;        \
  template class SoftmaxLogLossOp<T>;  \
  template class WeightedSumOp<T>;

ELASTIC_INSTANTIATE_OPS(float)
ELASTIC_INSTANTIATE_OPS(double)
#undef ELASTIC_INSTANTIATE_OPS

}  // namespace elastic

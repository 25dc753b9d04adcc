#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. Deliberately naive; none of them call into the library
// kernels.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "elastic/budget.hpp"
#include "elastic/kernels.hpp"
#include "elastic/tensor.hpp"

namespace oracle {

using elastic::Padding;
using elastic::Tensor;

struct Axis {
  std::size_t out;
  long pad;
};

inline Axis axis(std::size_t in, std::size_t k, std::size_t s, Padding p) {
  if (p == Padding::valid) return {(in - k) / s + 1, 0};
  const std::size_t out = (in + s - 1) / s;
  const long need = static_cast<long>((out - 1) * s + k) - static_cast<long>(in);
  return {out, need > 0 ? need / 2 : 0};
}

/// Per output element: sum over (ky, kx, ci) in that order, then bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, std::size_t s,
                 Padding p) {
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t K = w.dim(0), F = w.dim(3);
  const Axis ay = axis(H, K, s, p), ax = axis(W, K, s, p);
  Tensor<T> y({N, ay.out, ax.out, F});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t oy = 0; oy < ay.out; ++oy)
      for (std::size_t ox = 0; ox < ax.out; ++ox)
        for (std::size_t f = 0; f < F; ++f) {
          T acc = 0;
          for (std::size_t ky = 0; ky < K; ++ky)
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long iy = static_cast<long>(oy * s + ky) - ay.pad;
              const long ix = static_cast<long>(ox * s + kx) - ax.pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              for (std::size_t c = 0; c < C; ++c) {
                acc += x.at({n, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c}) *
                       w.at({ky, kx, c, f});
              }
            }
          if (b) acc += (*b)[f];
          y.at({n, oy, ox, f}) = acc;
        }
  return y;
}

template <typename T>
Tensor<T> depthwise(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, std::size_t s,
                    Padding p) {
  const std::size_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t K = w.dim(0);
  const Axis ay = axis(H, K, s, p), ax = axis(W, K, s, p);
  Tensor<T> y({N, ay.out, ax.out, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t oy = 0; oy < ay.out; ++oy)
      for (std::size_t ox = 0; ox < ax.out; ++ox)
        for (std::size_t c = 0; c < C; ++c) {
          T acc = 0;
          for (std::size_t ky = 0; ky < K; ++ky)
            for (std::size_t kx = 0; kx < K; ++kx) {
              const long iy = static_cast<long>(oy * s + ky) - ay.pad;
              const long ix = static_cast<long>(ox * s + kx) - ax.pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              acc += x.at({n, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c}) *
                     w.at({ky, kx, c});
            }
          if (b) acc += (*b)[c];
          y.at({n, oy, ox, c}) = acc;
        }
  return y;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b) {
  const std::size_t N = x.dim(0), F = x.dim(1), C = w.dim(1);
  Tensor<T> y({N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      T acc = 0;
      for (std::size_t f = 0; f < F; ++f) acc += x.at({n, f}) * w.at({f, c});
      if (b) acc += (*b)[c];
      y.at({n, c}) = acc;
    }
  return y;
}

/// Deepest exit whose cost fits, scanning every row.
inline long select_exit(const elastic::CostTable& t, const elastic::Budget& b) {
  long best = -1;
  for (const auto& r : t.rows) {
    const double cost = b.metric == elastic::BudgetMetric::flops ? static_cast<double>(r.flops)
                                                                 : static_cast<double>(r.params);
    if (cost <= b.limit) best = static_cast<long>(r.exit);
  }
  return best;
}

template <typename T>
Tensor<T> random_tensor(elastic::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

}  // namespace oracle

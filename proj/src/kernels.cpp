#include "elastic/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace elastic {

AxisPlan plan_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw ContractViolation("stride must be >= 1");
  if (kernel == 0) throw ContractViolation("kernel size must be >= 1");
  AxisPlan plan;
  if (padding == Padding::same) {
    plan.out = (in + stride - 1) / stride;
    const std::size_t needed = (plan.out - 1) * stride + kernel;
    const std::size_t total = needed > in ? needed - in : 0;
    plan.pad_before = total / 2;
  } else {
    if (in < kernel) {
      throw ShapeError("valid window of " + std::to_string(kernel) + " does not fit extent " +
                       std::to_string(in));
    }
    plan.out = (in - kernel) / stride + 1;
    plan.pad_before = 0;
  }
  return plan;
}

namespace kernels {
namespace {

struct Geometry {
  std::size_t n, h, w, c;
  AxisPlan rows, cols;
};

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

Geometry image_geometry(const Shape& x, std::size_t kernel, std::size_t stride, Padding padding,
                        const char* what) {
  require_rank(x, 4, what);
  Geometry g{x[0], x[1], x[2], x[3], {}, {}};
  g.rows = plan_axis(g.h, kernel, stride, padding);
  g.cols = plan_axis(g.w, kernel, stride, padding);
  return g;
}

// Input coordinate for output position `o` and kernel tap `k`, or -1 when it
// falls into padding.
inline std::ptrdiff_t source(std::size_t o, std::size_t k, std::size_t stride, const AxisPlan& plan,
                             std::size_t extent) {
  const auto pos = static_cast<std::ptrdiff_t>(o * stride + k) -
                   static_cast<std::ptrdiff_t>(plan.pad_before);
  return (pos < 0 || pos >= static_cast<std::ptrdiff_t>(extent)) ? -1 : pos;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, std::size_t stride,
                 Padding padding) {
  require_rank(w.shape(), 4, "conv2d kernel");
  const std::size_t k = w.dim(0);
  if (w.dim(1) != k) throw ShapeError("conv2d kernel must be square");
  const Geometry g = image_geometry(x.shape(), k, stride, padding, "conv2d input");
  const std::size_t cin = g.c;
  if (w.dim(2) != cin) {
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(cin) +
                     " channels, kernel expects " + std::to_string(w.dim(2)));
  }
  const std::size_t cout = w.dim(3);
  if (bias && bias->size() != cout) throw ShapeError("conv2d bias length mismatch");

  Tensor<T> y({g.n, g.rows.out, g.cols.out, cout});
  const T* px = x.raw();
  const T* pw = w.raw();
  T* py = y.raw();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        T* acc = py + ((n * g.rows.out + oy) * g.cols.out + ox) * cout;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            const T* xin = px + ((n * g.h + iy) * g.w + ix) * cin;
            const T* wk = pw + (ky * k + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = xin[ci];
              const T* wr = wk + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) acc[co] += xv * wr[co];
            }
          }
        }
        if (bias) {
          const T* b = bias->raw();
          for (std::size_t co = 0; co < cout; ++co) acc[co] += b[co];
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, std::size_t stride,
                     Padding padding, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gbias) {
  const std::size_t k = w.dim(0);
  const Geometry g = image_geometry(x.shape(), k, stride, padding, "conv2d input");
  const std::size_t cin = g.c;
  const std::size_t cout = w.dim(3);
  const T* px = x.raw();
  const T* pg = gy.raw();

  // Transposed kernel (K, K, Cout, Cin) so the input-gradient inner loop
  // runs over contiguous memory.
  std::vector<T> wt;
  if (gx) {
    wt.resize(w.size());
    const T* pw = w.raw();
    for (std::size_t tap = 0; tap < k * k; ++tap) {
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t co = 0; co < cout; ++co) {
          wt[(tap * cout + co) * cin + ci] = pw[(tap * cin + ci) * cout + co];
        }
      }
    }
  }

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        const T* grow = pg + ((n * g.rows.out + oy) * g.cols.out + ox) * cout;
        if (gbias) {
          T* gb = gbias->raw();
          for (std::size_t co = 0; co < cout; ++co) gb[co] += grow[co];
        }
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            const std::size_t tap = ky * k + kx;
            const std::size_t in_off = ((n * g.h + iy) * g.w + ix) * cin;
            if (gw) {
              const T* xin = px + in_off;
              T* gwk = gw->raw() + tap * cin * cout;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const T xv = xin[ci];
                T* gwr = gwk + ci * cout;
                for (std::size_t co = 0; co < cout; ++co) gwr[co] += xv * grow[co];
              }
            }
            if (gx) {
              T* gxin = gx->raw() + in_off;
              const T* wtk = wt.data() + tap * cout * cin;
              for (std::size_t co = 0; co < cout; ++co) {
                const T gv = grow[co];
                const T* wr = wtk + co * cin;
                for (std::size_t ci = 0; ci < cin; ++ci) gxin[ci] += gv * wr[ci];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                           std::size_t stride, Padding padding) {
  require_rank(w.shape(), 3, "depthwise kernel");
  const std::size_t k = w.dim(0);
  if (w.dim(1) != k) throw ShapeError("depthwise kernel must be square");
  const Geometry g = image_geometry(x.shape(), k, stride, padding, "depthwise input");
  const std::size_t c = g.c;
  if (w.dim(2) != c) {
    throw ShapeError("depthwise channel mismatch: input has " + std::to_string(c) +
                     " channels, kernel expects " + std::to_string(w.dim(2)));
  }
  if (bias && bias->size() != c) throw ShapeError("depthwise bias length mismatch");

  Tensor<T> y({g.n, g.rows.out, g.cols.out, c});
  const T* px = x.raw();
  const T* pw = w.raw();
  T* py = y.raw();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        T* acc = py + ((n * g.rows.out + oy) * g.cols.out + ox) * c;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            const T* xin = px + ((n * g.h + iy) * g.w + ix) * c;
            const T* wk = pw + (ky * k + kx) * c;
            for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += xin[ch] * wk[ch];
          }
        }
        if (bias) {
          const T* b = bias->raw();
          for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += b[ch];
        }
      }
    }
  }
  return y;
}

template <typename T>
void depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                               std::size_t stride, Padding padding, Tensor<T>* gx, Tensor<T>* gw,
                               Tensor<T>* gbias) {
  const std::size_t k = w.dim(0);
  const Geometry g = image_geometry(x.shape(), k, stride, padding, "depthwise input");
  const std::size_t c = g.c;
  const T* px = x.raw();
  const T* pw = w.raw();
  const T* pg = gy.raw();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        const T* grow = pg + ((n * g.rows.out + oy) * g.cols.out + ox) * c;
        if (gbias) {
          T* gb = gbias->raw();
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += grow[ch];
        }
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            const std::size_t in_off = ((n * g.h + iy) * g.w + ix) * c;
            const std::size_t tap = (ky * k + kx) * c;
            if (gw) {
              T* gwk = gw->raw() + tap;
              const T* xin = px + in_off;
              for (std::size_t ch = 0; ch < c; ++ch) gwk[ch] += xin[ch] * grow[ch];
            }
            if (gx) {
              T* gxin = gx->raw() + in_off;
              const T* wk = pw + tap;
              for (std::size_t ch = 0; ch < c; ++ch) gxin[ch] += wk[ch] * grow[ch];
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias) {
  require_rank(x.shape(), 2, "dense input");
  require_rank(w.shape(), 2, "dense weight");
  const std::size_t n = x.dim(0), f = x.dim(1), c = w.dim(1);
  if (w.dim(0) != f) {
    throw ShapeError("dense length mismatch: input has " + std::to_string(f) +
                     " features, weight expects " + std::to_string(w.dim(0)));
  }
  if (bias && bias->size() != c) throw ShapeError("dense bias length mismatch");
  Tensor<T> y({n, c});
  for (std::size_t row = 0; row < n; ++row) {
    T* acc = y.raw() + row * c;
    const T* xr = x.raw() + row * f;
    for (std::size_t i = 0; i < f; ++i) {
      const T xv = xr[i];
      const T* wr = w.raw() + i * c;
      for (std::size_t j = 0; j < c; ++j) acc[j] += xv * wr[j];
    }
    if (bias) {
      for (std::size_t j = 0; j < c; ++j) acc[j] += (*bias)[j];
    }
  }
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx,
                    Tensor<T>* gw, Tensor<T>* gbias) {
  const std::size_t n = x.dim(0), f = x.dim(1), c = w.dim(1);
  for (std::size_t row = 0; row < n; ++row) {
    const T* g = gy.raw() + row * c;
    const T* xr = x.raw() + row * f;
    if (gbias) {
      for (std::size_t j = 0; j < c; ++j) (*gbias)[j] += g[j];
    }
    for (std::size_t i = 0; i < f; ++i) {
      const T* wr = w.raw() + i * c;
      if (gw) {
        T* gwr = gw->raw() + i * c;
        const T xv = xr[i];
        for (std::size_t j = 0; j < c; ++j) gwr[j] += xv * g[j];
      }
      if (gx) {
        T sum = 0;
        for (std::size_t j = 0; j < c; ++j) sum += wr[j] * g[j];
        (*gx)[row * f + i] += sum;
      }
    }
  }
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t size, std::size_t stride, Padding padding,
                     std::vector<std::size_t>* argmax) {
  const Geometry g = image_geometry(x.shape(), size, stride, padding, "max_pool2d input");
  Tensor<T> y({g.n, g.rows.out, g.cols.out, g.c});
  if (argmax) argmax->assign(y.size(), 0);
  std::vector<T> best(g.c);
  std::vector<std::size_t> where(g.c);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        std::fill(best.begin(), best.end(), -std::numeric_limits<T>::infinity());
        std::fill(where.begin(), where.end(), std::numeric_limits<std::size_t>::max());
        for (std::size_t ky = 0; ky < size; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < size; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            const std::size_t off = ((n * g.h + iy) * g.w + ix) * g.c;
            for (std::size_t ch = 0; ch < g.c; ++ch) {
              const T v = x[off + ch];
              if (v > best[ch] || where[ch] == std::numeric_limits<std::size_t>::max()) {
                best[ch] = v;
                where[ch] = off + ch;
              }
            }
          }
        }
        const std::size_t out = ((n * g.rows.out + oy) * g.cols.out + ox) * g.c;
        for (std::size_t ch = 0; ch < g.c; ++ch) {
          y[out + ch] = best[ch];
          if (argmax) (*argmax)[out + ch] = where[ch];
        }
      }
    }
  }
  return y;
}

template <typename T>
void max_pool2d_backward(const Tensor<T>& gy, std::span<const std::size_t> argmax, Tensor<T>& gx) {
  for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t size, std::size_t stride, Padding padding) {
  const Geometry g = image_geometry(x.shape(), size, stride, padding, "avg_pool2d input");
  Tensor<T> y({g.n, g.rows.out, g.cols.out, g.c});
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        T* acc = y.raw() + ((n * g.rows.out + oy) * g.cols.out + ox) * g.c;
        std::size_t count = 0;
        for (std::size_t ky = 0; ky < size; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < size; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            ++count;
            const T* xin = x.raw() + ((n * g.h + iy) * g.w + ix) * g.c;
            for (std::size_t ch = 0; ch < g.c; ++ch) acc[ch] += xin[ch];
          }
        }
        const T denom = static_cast<T>(count);
        for (std::size_t ch = 0; ch < g.c; ++ch) acc[ch] /= denom;
      }
    }
  }
  return y;
}

template <typename T>
void avg_pool2d_backward(const Tensor<T>& gy, const Shape& x_shape, std::size_t size,
                         std::size_t stride, Padding padding, Tensor<T>& gx) {
  const Geometry g = image_geometry(x_shape, size, stride, padding, "avg_pool2d input");
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.rows.out; ++oy) {
      for (std::size_t ox = 0; ox < g.cols.out; ++ox) {
        std::size_t count = 0;
        for (std::size_t ky = 0; ky < size; ++ky) {
          if (source(oy, ky, stride, g.rows, g.h) < 0) continue;
          for (std::size_t kx = 0; kx < size; ++kx) {
            if (source(ox, kx, stride, g.cols, g.w) >= 0) ++count;
          }
        }
        const T* grow = gy.raw() + ((n * g.rows.out + oy) * g.cols.out + ox) * g.c;
        const T denom = static_cast<T>(count);
        for (std::size_t ky = 0; ky < size; ++ky) {
          const auto iy = source(oy, ky, stride, g.rows, g.h);
          if (iy < 0) continue;
          for (std::size_t kx = 0; kx < size; ++kx) {
            const auto ix = source(ox, kx, stride, g.cols, g.w);
            if (ix < 0) continue;
            T* gxin = gx.raw() + ((n * g.h + iy) * g.w + ix) * g.c;
            for (std::size_t ch = 0; ch < g.c; ++ch) gxin[ch] += grow[ch] / denom;
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool input");
  const std::size_t n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  Tensor<T> y({n, c});
  const T denom = static_cast<T>(hw);
  for (std::size_t b = 0; b < n; ++b) {
    T* acc = y.raw() + b * c;
    for (std::size_t p = 0; p < hw; ++p) {
      const T* xin = x.raw() + (b * hw + p) * c;
      for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += xin[ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) acc[ch] /= denom;
  }
  return y;
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& gy, Tensor<T>& gx) {
  const std::size_t n = gx.dim(0), hw = gx.dim(1) * gx.dim(2), c = gx.dim(3);
  const T denom = static_cast<T>(hw);
  for (std::size_t b = 0; b < n; ++b) {
    const T* g = gy.raw() + b * c;
    for (std::size_t p = 0; p < hw; ++p) {
      T* gxin = gx.raw() + (b * hw + p) * c;
      for (std::size_t ch = 0; ch < c; ++ch) gxin[ch] += g[ch] / denom;
    }
  }
}

template <typename T>
void channel_moments(const Tensor<T>& x, std::vector<T>& mean, std::vector<T>& var) {
  const std::size_t c = x.shape().back();
  const std::size_t m = x.size() / c;
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.raw() + i * c;
    for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += row[ch];
  }
  mean.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) mean[ch] = static_cast<T>(sum[ch] / m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.raw() + i * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = static_cast<double>(row[ch]) - static_cast<double>(mean[ch]);
      sq[ch] += d * d;
    }
  }
  var.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) var[ch] = static_cast<T>(sq[ch] / m);
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                     std::span<const T> mean, std::span<const T> var, double eps) {
  const std::size_t c = x.shape().back();
  if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c) {
    throw ShapeError("batch_norm parameter length does not match " + std::to_string(c) +
                     " channels");
  }
  std::vector<T> inv(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    inv[ch] = T{1} / std::sqrt(var[ch] + static_cast<T>(eps));
  }
  Tensor<T> y(x.shape());
  const std::size_t m = x.size() / c;
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.raw() + i * c;
    T* out = y.raw() + i * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[ch] = gamma[ch] * ((row[ch] - mean[ch]) * inv[ch]) + beta[ch];
    }
  }
  return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw ContractViolation("concat of zero tensors");
  Shape lead = parts[0]->shape();
  lead.pop_back();
  std::size_t total = 0;
  for (const auto* p : parts) {
    Shape s = p->shape();
    const std::size_t c = s.back();
    s.pop_back();
    if (s != lead) {
      throw ShapeError("concat spatial mismatch: " + shape_string(parts[0]->shape()) + " vs " +
                       shape_string(p->shape()));
    }
    total += c;
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor<T> y(out_shape);
  const std::size_t rows = y.size() / total;
  for (std::size_t r = 0; r < rows; ++r) {
    T* out = y.raw() + r * total;
    for (const auto* p : parts) {
      const std::size_t c = p->shape().back();
      std::copy_n(p->raw() + r * c, c, out);
      out += c;
    }
  }
  return y;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const std::size_t c = logits.shape().back();
  const std::size_t rows = logits.size() / c;
  Tensor<T> y(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * c;
    T* p = y.raw() + r * c;
    const T top = *std::max_element(z, z + c);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(z[j] - top);
      sum += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= sum;
  }
  return y;
}

#define ELASTIC_INSTANTIATE_KERNELS(T)                                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, std::size_t,     \
                            Padding);                                                              \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, \
                                Padding, Tensor<T>*, Tensor<T>*, Tensor<T>*);                      \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,        \
                                      std::size_t, Padding);                                       \
  template void depthwise_conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                          std::size_t, Padding, Tensor<T>*, Tensor<T>*,            \
                                          Tensor<T>*);                                             \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                  \
  template void dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,   \
                               Tensor<T>*, Tensor<T>*);                                            \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t, std::size_t, Padding,               \
                                std::vector<std::size_t>*);                                        \
  template void max_pool2d_backward(const Tensor<T>&, std::span<const std::size_t>, Tensor<T>&);   \
  template Tensor<T> avg_pool2d(const Tensor<T>&, std::size_t, std::size_t, Padding);              \
  template void avg_pool2d_backward(const Tensor<T>&, const Shape&, std::size_t, std::size_t,      \
                                    Padding, Tensor<T>&);                                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                            \
  template void global_avg_pool_backward(const Tensor<T>&, Tensor<T>&);                            \
  template void channel_moments(const Tensor<T>&, std::vector<T>&, std::vector<T>&);               \
  template Tensor<T> batch_norm(const Tensor<T>&, std::span<const T>, std::span<const T>,          \
                                std::span<const T>, std::span<const T>, double);                   \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                           \
  template Tensor<T> softmax_rows(const Tensor<T>&);

ELASTIC_INSTANTIATE_KERNELS(float)
ELASTIC_INSTANTIATE_KERNELS(double)

#undef ELASTIC_INSTANTIATE_KERNELS

}  // namespace kernels
}  // namespace elastic

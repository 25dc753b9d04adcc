#include "elastic/tensor.hpp"

#include <cmath>
#include <sstream>

namespace elastic {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("accumulate: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  T* pa = a.raw();
  const T* pb = b.raw();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) pa[i] += pb[i];
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);
template void accumulate(Tensor<float>&, const Tensor<float>&);
template void accumulate(Tensor<double>&, const Tensor<double>&);

}  // namespace elastic

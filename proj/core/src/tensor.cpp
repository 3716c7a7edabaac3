#include "berd/tensor.hpp"

#include <cmath>

namespace berd {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T x : t.values()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

}  // namespace berd

#include "wafer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Core>

#include "wafer/error.hpp"

namespace wafer::nn {

std::size_t shape_size(const Shape& s) noexcept {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::ranges::fill(values_, v);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const& {
  return Tensor(*this).reshaped(std::move(shape));
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) && {
  if (shape_size(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.values_ = std::move(values_);
  return out;
}

template <typename T>
void Tensor<T>::check_finite(const std::string& where) const {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  if (Eigen::Map<const Arr>(values_.data(), static_cast<Eigen::Index>(values_.size())).allFinite()) {
    return;
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError("non-finite value in " + where + " at flat index " + std::to_string(i));
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace wafer::nn

#pragma once

#include <cstddef>
#include <new>
#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace wafer::nn {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage, so vectorised kernels see the same alignment on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

std::size_t shape_size(const Shape& s) noexcept;
std::string shape_string(const Shape& s);

/// Dense row-major tensor. Batched activations are laid out [N, H, W, C].
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  void fill(T v);
  /// Same values, new shape of equal size.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Throws NumericError naming `where` if any value is NaN or infinite.
  void check_finite(const std::string& where) const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::copy(values_.begin(), values_.end(), out.data());
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T, AlignedAllocator<T>> values_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace wafer::nn

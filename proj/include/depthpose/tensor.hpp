#ifndef DEPTHPOSE_TENSOR_HPP_
#define DEPTHPOSE_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace depthpose {

using Shape = std::vector<std::size_t>;

/// Thrown whenever two tensors (or a tensor and an expected layout) disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

/// Allocator with a fixed 64-byte alignment.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, kAlignment);
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

/**
 * Dense row-major n-dimensional array. Holds network inputs, activations,
 * parameters and gradients alike.
 *
 * Invariant: shape_volume(shape()) == size(), every extent positive.
 */
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_volume(shape_), fill);
  }

  using Storage = std::vector<T, AlignedAllocator<T>>;

  Tensor(Shape shape, const std::vector<T>& data)
      : Tensor(std::move(shape), Storage(data.begin(), data.end())) {}

  Tensor(Shape shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (shape_volume(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " needs " +
                       std::to_string(shape_volume(shape_)) +
                       " values, got " + std::to_string(data_.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  /// Same data, new shape of equal volume.
  Tensor reshaped(Shape shape) const& {
    return Tensor(std::move(shape), data_);
  }
  Tensor reshaped(Shape shape) && {
    return Tensor(std::move(shape), std::move(data_));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_extents() const {
    for (std::size_t e : shape_) {
      if (e == 0) {
        throw ShapeError("tensor extents must be positive, got " +
                         shape_string(shape_));
      }
    }
  }

  Shape shape_;
  Storage data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  std::transform(t.values().begin(), t.values().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return Tensor<To>(t.shape(), std::move(out));
}

inline void require_shape(const Shape& actual, const Shape& expected,
                          const std::string& what) {
  if (actual != expected) {
    throw ShapeError(what + ": expected shape " + shape_string(expected) +
                     ", got " + shape_string(actual));
  }
}

inline void require_rank(const Shape& actual, std::size_t rank,
                         const std::string& what) {
  if (actual.size() != rank) {
    throw ShapeError(what + ": expected rank " + std::to_string(rank) +
                     " tensor, got " + shape_string(actual));
  }
}

/// out += in, elementwise.
template <typename T>
void accumulate(Tensor<T>& out, const Tensor<T>& in) {
  require_shape(in.shape(), out.shape(), "accumulate");
  T* o = out.data();
  const T* s = in.data();
  for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] += s[i];
}

}  // namespace depthpose

#endif  // DEPTHPOSE_TENSOR_HPP_

// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace mpcrn {

// Heap buffers start on a cache-line boundary so vectorized kernels split
// work the same way on every run, independent of where malloc put them.
inline constexpr std::size_t kBufferAlign = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlign}));
  }
  void deallocate(T* ptr, std::size_t) noexcept {
    ::operator delete(ptr, std::align_val_t{kBufferAlign});
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// (batch, channel, time, frequency); frequency is the fastest axis.
struct Shape4 {
  std::size_t n = 0, c = 0, t = 0, f = 0;

  std::size_t size() const { return n * c * t * f; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(t) +
           "," + std::to_string(f) + ")";
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return ((n * shape_.c + c) * shape_.t + t) * shape_.f + f;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t f) {
    return data_[index(n, c, t, f)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return data_[index(n, c, t, f)];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  AlignedVector<T>& vec() { return data_; }
  const AlignedVector<T>& vec() const { return data_; }

  // Contiguous (t, f) plane of one (batch, channel) pair.
  T* plane(std::size_t n, std::size_t c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(std::size_t n, std::size_t c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Frames [t0, t0 + count) along the time axis.
  Tensor slice_time(std::size_t t0, std::size_t count) const {
    Tensor out({shape_.n, shape_.c, count, shape_.f});
    for (std::size_t n = 0; n < shape_.n; ++n)
      for (std::size_t c = 0; c < shape_.c; ++c)
        for (std::size_t t = 0; t < count; ++t)
          for (std::size_t f = 0; f < shape_.f; ++f)
            out(n, c, t, f) = (*this)(n, c, t0 + t, f);
    return out;
  }

 private:
  Shape4 shape_;
  AlignedVector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& in) {
  Tensor<To> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out.data()[i] = static_cast<To>(in.data()[i]);
  return out;
}

// (lanes, steps, width) batch of vector sequences fed to the recurrent layers.
template <typename T>
struct Sequence {
  std::size_t lanes = 0, steps = 0, width = 0;
  AlignedVector<T> data;

  Sequence() = default;
  Sequence(std::size_t l, std::size_t s, std::size_t w)
      : lanes(l), steps(s), width(w), data(l * s * w, T(0)) {}

  T* row(std::size_t lane, std::size_t step) { return data.data() + (lane * steps + step) * width; }
  const T* row(std::size_t lane, std::size_t step) const {
    return data.data() + (lane * steps + step) * width;
  }
};

}  // namespace mpcrn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gmg/errors.hpp"

namespace gmg {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

/// 64-byte aligned storage so vectorized kernels see the same alignment on every
/// allocation; otherwise SIMD head/tail splits, and hence rounding, vary run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

/// Dense row-major tensor with value semantics.
template <class T>
class Tensor {
 public:
  using value_type = T;
  using Storage = std::vector<T, AlignedAllocator<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (int d : shape_) detail::require(d >= 0, "negative tensor dimension");
  }
  Tensor(Shape shape, const std::vector<T>& data) : Tensor(std::move(shape), Storage(data.begin(), data.end())) {}
  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    detail::require(data_.size() == shape_size(shape_),
                    "tensor data size does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? rank() + i : i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }
  T& at(int a, int b, int c, int d) { return data_[offset(a, b, c, d)]; }
  const T& at(int a, int b, int c, int d) const { return data_[offset(a, b, c, d)]; }

  Tensor reshaped(Shape s) const {
    detail::require(shape_size(s) == size(), "reshape " + shape_str(shape_) + " -> " + shape_str(s));
    return Tensor(std::move(s), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor& operator+=(const Tensor& o) {
    detail::require(o.shape_ == shape_, "+= shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Storage data_;
};

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "max_abs_diff shape mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

/// Frame `t` of a B x T x C x H x W sequence, as B x C x H x W.
template <class T>
Tensor<T> frame_at(const Tensor<T>& seq, int t) {
  detail::require(seq.rank() == 5, "frame_at expects a rank-5 sequence");
  const int B = seq.dim(0), S = seq.dim(1);
  detail::require(t >= 0 && t < S, "frame index out of range");
  const std::size_t fsz = shape_size({seq.dim(2), seq.dim(3), seq.dim(4)});
  Tensor<T> out({B, seq.dim(2), seq.dim(3), seq.dim(4)});
  for (int b = 0; b < B; ++b)
    std::copy_n(seq.data() + (static_cast<std::size_t>(b) * S + t) * fsz, fsz, out.data() + b * fsz);
  return out;
}

/// Stack T frames (each B x C x H x W) into B x T x C x H x W.
template <class T>
Tensor<T> stack_frames(const std::vector<Tensor<T>>& frames) {
  detail::require(!frames.empty(), "stack_frames needs at least one frame");
  const Shape& f = frames.front().shape();
  detail::require(f.size() == 4, "stack_frames expects rank-4 frames");
  const int B = f[0], S = static_cast<int>(frames.size());
  const std::size_t fsz = shape_size({f[1], f[2], f[3]});
  Tensor<T> out({B, S, f[1], f[2], f[3]});
  for (int t = 0; t < S; ++t) {
    detail::require(frames[t].shape() == f, "stack_frames shape mismatch");
    for (int b = 0; b < B; ++b)
      std::copy_n(frames[t].data() + b * fsz, fsz, out.data() + (static_cast<std::size_t>(b) * S + t) * fsz);
  }
  return out;
}

/// Frames [t0, t1) of a sequence.
template <class T>
Tensor<T> time_slice(const Tensor<T>& seq, int t0, int t1) {
  std::vector<Tensor<T>> frames;
  for (int t = t0; t < t1; ++t) frames.push_back(frame_at(seq, t));
  return stack_frames(frames);
}

/// Samples [b0, b1) of a batched tensor (any rank >= 1).
template <class T>
Tensor<T> batch_slice(const Tensor<T>& x, int b0, int b1) {
  detail::require(x.rank() >= 1 && 0 <= b0 && b0 <= b1 && b1 <= x.dim(0), "batch_slice range");
  Shape s = x.shape();
  const std::size_t per = x.size() / std::max(1, s[0]);
  s[0] = b1 - b0;
  typename Tensor<T>::Storage d(x.data() + b0 * per, x.data() + b1 * per);
  return Tensor<T>(std::move(s), std::move(d));
}

/// Concatenate along the batch axis; all trailing dims must agree.
template <class T>
Tensor<T> batch_concat(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "batch_concat needs input");
  Shape s = parts.front().shape();
  typename Tensor<T>::Storage d;
  int b = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    ps[0] = s[0];
    detail::require(ps == s, "batch_concat shape mismatch");
    b += p.dim(0);
    d.insert(d.end(), p.storage().begin(), p.storage().end());
  }
  s[0] = b;
  return Tensor<T>(std::move(s), std::move(d));
}

}  // namespace gmg

#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/image.hpp"

namespace realsr {

/// 64-byte aligned storage. Vectorized reductions peel by address, so
/// aligned buffers make float results depend on shapes only, never on where
/// the allocator happened to place the data.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// NCHW batch. Image b of the batch is laid out exactly like a planar BasicImage.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0)) : n(n_), c(c_), h(h_), w(w_) {
    data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t item_size() const { return plane() * c; }
  std::size_t size() const { return data.size(); }

  T* item(int b) { return data.data() + b * item_size(); }
  const T* item(int b) const { return data.data() + b * item_size(); }
  T* channel(int b, int ch) { return item(b) + ch * plane(); }
  const T* channel(int b, int ch) const { return item(b) + ch * plane(); }

  T& at(int b, int ch, int y, int x) { return data[(static_cast<std::size_t>(b) * c + ch) * plane() + static_cast<std::size_t>(y) * w + x]; }
  T at(int b, int ch, int y, int x) const { return data[(static_cast<std::size_t>(b) * c + ch) * plane() + static_cast<std::size_t>(y) * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  Tensor& operator+=(const Tensor& o) {
    require(same_shape(o), "tensor add: shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
};

template <typename T, typename U>
Tensor<T> to_tensor(const std::vector<BasicImage<U>>& batch) {
  require(!batch.empty(), "empty batch");
  const auto& f = batch.front();
  Tensor<T> t(static_cast<int>(batch.size()), f.channels, f.height, f.width);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b].same_shape(f), "batch images must share a shape");
    std::copy(batch[b].data.begin(), batch[b].data.end(), t.item(static_cast<int>(b)));
  }
  return t;
}

template <typename T, typename U>
Tensor<T> to_tensor(const BasicImage<U>& img) {
  Tensor<T> t(1, img.channels, img.height, img.width);
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

template <typename U, typename T>
BasicImage<U> image_at(const Tensor<T>& t, int b) {
  BasicImage<U> img(t.h, t.w, t.c);
  std::copy(t.item(b), t.item(b) + t.item_size(), img.data.begin());
  return img;
}

template <typename U, typename T>
std::vector<BasicImage<U>> to_images(const Tensor<T>& t) {
  std::vector<BasicImage<U>> out;
  out.reserve(static_cast<std::size_t>(t.n));
  for (int b = 0; b < t.n; ++b) out.push_back(image_at<U>(t, b));
  return out;
}

}  // namespace realsr

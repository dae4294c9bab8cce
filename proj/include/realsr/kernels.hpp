#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/image.hpp"

namespace realsr {

enum class BoundaryMode { reflect };

/// Index into [0, n) under whole-sample reflection: ... c b | a b c d | c b ...
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Low-pass kernel w_l; the high-pass is implied as delta - w_l.
struct FilterBank {
  int kernel_size = 1;
  std::vector<double> lowpass_weights{1.0};
  BoundaryMode boundary_mode = BoundaryMode::reflect;
  bool uniform = true;

  int radius() const { return kernel_size / 2; }
  double weight(int dy, int dx) const { return lowpass_weights[static_cast<std::size_t>(dy) * kernel_size + dx]; }
};

inline FilterBank make_moving_average(int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw InvalidArgument("moving-average kernel size must be odd and >= 1, got " + std::to_string(kernel_size));
  FilterBank fb;
  fb.kernel_size = kernel_size;
  const double w = 1.0 / (static_cast<double>(kernel_size) * kernel_size);
  fb.lowpass_weights.assign(static_cast<std::size_t>(kernel_size) * kernel_size, w);
  fb.uniform = true;
  return fb;
}

/// Arbitrary k x k low-pass weights (row-major). Must sum to one.
inline FilterBank make_filter_bank(int kernel_size, std::vector<double> weights) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw InvalidArgument("kernel size must be odd and >= 1");
  require(weights.size() == static_cast<std::size_t>(kernel_size) * kernel_size, "kernel weight count mismatch");
  double sum = 0;
  for (double w : weights) sum += w;
  require(std::abs(sum - 1.0) <= 1e-9, "low-pass weights must sum to 1");
  FilterBank fb;
  fb.kernel_size = kernel_size;
  fb.lowpass_weights = std::move(weights);
  fb.uniform = false;
  return fb;
}

namespace detail {

// 1-D box pass along rows (horizontal=true) or columns, scaled by 1/k.
template <typename T>
void box_pass(const T* in, T* out, int h, int w, int k, bool horizontal) {
  const int r = k / 2;
  const T scale = T(1) / T(k);
  if (horizontal) {
    for (int y = 0; y < h; ++y) {
      const T* row = in + static_cast<std::size_t>(y) * w;
      T* orow = out + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        T acc = 0;
        for (int d = -r; d <= r; ++d) acc += row[reflect_index(x + d, w)];
        orow[x] = acc * scale;
      }
    }
  } else {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int y = 0; y < h; ++y) {
      for (int d = -r; d <= r; ++d) idx[d + r] = reflect_index(y + d, h);
      T* orow = out + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) orow[x] = 0;
      for (int t = 0; t < k; ++t) {
        const T* src = in + static_cast<std::size_t>(idx[t]) * w;
        for (int x = 0; x < w; ++x) orow[x] += src[x];
      }
      for (int x = 0; x < w; ++x) orow[x] *= scale;
    }
  }
}

// Adjoint of box_pass: scatters each output back onto its reflected taps.
template <typename T>
void box_pass_adjoint(const T* gout, T* gin, int h, int w, int k, bool horizontal) {
  const int r = k / 2;
  const T scale = T(1) / T(k);
  std::fill(gin, gin + static_cast<std::size_t>(h) * w, T(0));
  if (horizontal) {
    for (int y = 0; y < h; ++y) {
      const T* grow = gout + static_cast<std::size_t>(y) * w;
      T* irow = gin + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        const T g = grow[x] * scale;
        for (int d = -r; d <= r; ++d) irow[reflect_index(x + d, w)] += g;
      }
    }
  } else {
    for (int y = 0; y < h; ++y) {
      const T* grow = gout + static_cast<std::size_t>(y) * w;
      for (int d = -r; d <= r; ++d) {
        T* dst = gin + static_cast<std::size_t>(reflect_index(y + d, h)) * w;
        for (int x = 0; x < w; ++x) dst[x] += grow[x] * scale;
      }
    }
  }
}

}  // namespace detail

/// Dense reference convolution of one plane with reflection boundary.
template <typename T>
void lowpass_plane_dense(std::span<const T> in, std::span<T> out, int h, int w, const FilterBank& fb) {
  const int k = fb.kernel_size;
  const int r = fb.radius();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = reflect_index(y + dy - r, h);
        for (int dx = 0; dx < k; ++dx)
          acc += fb.weight(dy, dx) * static_cast<double>(in[static_cast<std::size_t>(sy) * w + reflect_index(x + dx - r, w)]);
      }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<T>(acc);
    }
}

/// w_l * plane. Uniform kernels take the separable path.
template <typename T>
void lowpass_plane(std::span<const T> in, std::span<T> out, int h, int w, const FilterBank& fb) {
  if (fb.kernel_size == 1) {
    const T w0 = static_cast<T>(fb.lowpass_weights[0]);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * w0;
    return;
  }
  if (!fb.uniform) {
    lowpass_plane_dense(in, out, h, w, fb);
    return;
  }
  std::vector<T> tmp(in.size());
  detail::box_pass(in.data(), tmp.data(), h, w, fb.kernel_size, true);
  detail::box_pass(tmp.data(), out.data(), h, w, fb.kernel_size, false);
}

/// Transpose of lowpass_plane; needed to backpropagate through the filter.
template <typename T>
void lowpass_plane_adjoint(std::span<const T> gout, std::span<T> gin, int h, int w, const FilterBank& fb) {
  const int k = fb.kernel_size;
  if (k == 1) {
    const T w0 = static_cast<T>(fb.lowpass_weights[0]);
    for (std::size_t i = 0; i < gout.size(); ++i) gin[i] = gout[i] * w0;
    return;
  }
  if (fb.uniform) {
    std::vector<T> tmp(gout.size());
    detail::box_pass_adjoint(gout.data(), tmp.data(), h, w, k, false);
    detail::box_pass_adjoint(tmp.data(), gin.data(), h, w, k, true);
    return;
  }
  const int r = fb.radius();
  std::fill(gin.begin(), gin.end(), T(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const T g = gout[static_cast<std::size_t>(y) * w + x];
      for (int dy = 0; dy < k; ++dy) {
        const int sy = reflect_index(y + dy - r, h);
        for (int dx = 0; dx < k; ++dx)
          gin[static_cast<std::size_t>(sy) * w + reflect_index(x + dx - r, w)] += static_cast<T>(fb.weight(dy, dx)) * g;
      }
    }
}

template <typename T>
void highpass_plane(std::span<const T> in, std::span<T> out, int h, int w, const FilterBank& fb) {
  lowpass_plane(in, out, h, w, fb);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - out[i];
}

template <typename T>
void highpass_plane_adjoint(std::span<const T> gout, std::span<T> gin, int h, int w, const FilterBank& fb) {
  lowpass_plane_adjoint(gout, gin, h, w, fb);
  for (std::size_t i = 0; i < gout.size(); ++i) gin[i] = gout[i] - gin[i];
}

template <typename T>
BasicImage<T> lowpass(const BasicImage<T>& img, const FilterBank& fb) {
  validate(img);
  BasicImage<T> out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) lowpass_plane(img.plane(c), out.plane(c), img.height, img.width, fb);
  return out;
}

template <typename T>
BasicImage<T> highpass(const BasicImage<T>& img, const FilterBank& fb) {
  validate(img);
  BasicImage<T> out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) highpass_plane(img.plane(c), out.plane(c), img.height, img.width, fb);
  return out;
}

template <typename T>
struct BasicFrequencyPair {
  BasicImage<T> low;
  BasicImage<T> high;
};
using FrequencyPair = BasicFrequencyPair<double>;

template <typename T>
BasicFrequencyPair<T> decompose(const BasicImage<T>& img, const FilterBank& fb) {
  BasicFrequencyPair<T> pair{lowpass(img, fb), BasicImage<T>()};
  pair.high = img - pair.low;
  return pair;
}

}  // namespace realsr

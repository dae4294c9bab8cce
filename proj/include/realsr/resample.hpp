#pragma once

#include <cmath>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/image.hpp"

namespace realsr {

/// Keys cubic convolution kernel, a = -0.5 (MATLAB imresize "bicubic").
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

enum class ResampleKernel { keys_cubic };

/// factor = input size / output size per axis; factor > 1 downscales.
struct ResampleSpec {
  double factor = 4.0;
  ResampleKernel kernel = ResampleKernel::keys_cubic;
  bool antialias = true;
};

/// Sparse weights for one output sample along one axis.
struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

inline int resized_length(int in_len, double factor) {
  return static_cast<int>(std::floor(static_cast<double>(in_len) / factor + 1e-9));
}

/// MATLAB-style contribution table. Output center u maps to input coordinate
/// (u + 0.5) * factor - 0.5; on downscale with antialiasing the kernel is
/// stretched by the factor. Weights are renormalized per output sample and
/// out-of-range taps are mirrored (edge sample repeated).
inline std::vector<Contribution> contributions(int in_len, int out_len, double factor, bool antialias) {
  const double scale = 1.0 / factor;
  const bool stretch = antialias && scale < 1.0;
  const double kernel_width = stretch ? 4.0 / scale : 4.0;
  std::vector<Contribution> table(static_cast<std::size_t>(out_len));
  for (int u = 0; u < out_len; ++u) {
    const double center = (u + 0.5) * factor - 0.5;
    const int left = static_cast<int>(std::floor(center - kernel_width / 2.0));
    const int taps = static_cast<int>(std::ceil(kernel_width)) + 2;
    Contribution& c = table[static_cast<std::size_t>(u)];
    double total = 0;
    for (int t = 0; t < taps; ++t) {
      const int idx = left + t;
      const double dist = center - idx;
      const double w = stretch ? scale * cubic_kernel(scale * dist) : cubic_kernel(dist);
      if (w == 0.0) continue;
      // symmetric mirror: -1 -> 0, n -> n-1
      int m = idx;
      const int period = 2 * in_len;
      m %= period;
      if (m < 0) m += period;
      if (m >= in_len) m = period - 1 - m;
      c.index.push_back(m);
      c.weight.push_back(w);
      total += w;
    }
    for (double& w : c.weight) w /= total;
  }
  return table;
}

namespace detail {

template <typename T>
BasicImage<T> resize_axis(const BasicImage<T>& in, int out_len, double factor, bool antialias, bool rows) {
  const int in_len = rows ? in.width : in.height;
  const auto table = contributions(in_len, out_len, factor, antialias);
  BasicImage<T> out(rows ? in.height : out_len, rows ? out_len : in.width, in.channels);
  for (int c = 0; c < in.channels; ++c) {
    if (rows) {
      for (int y = 0; y < in.height; ++y)
        for (int u = 0; u < out_len; ++u) {
          const auto& con = table[static_cast<std::size_t>(u)];
          double acc = 0;
          for (std::size_t t = 0; t < con.index.size(); ++t) acc += con.weight[t] * static_cast<double>(in.at(c, y, con.index[t]));
          out.at(c, y, u) = static_cast<T>(acc);
        }
    } else {
      for (int u = 0; u < out_len; ++u) {
        const auto& con = table[static_cast<std::size_t>(u)];
        for (int x = 0; x < in.width; ++x) {
          double acc = 0;
          for (std::size_t t = 0; t < con.index.size(); ++t) acc += con.weight[t] * static_cast<double>(in.at(c, con.index[t], x));
          out.at(c, u, x) = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Separable resize without the final clamp. rows_first selects the pass order.
template <typename T>
BasicImage<T> bicubic_resize_unclamped(const BasicImage<T>& img, const ResampleSpec& spec, bool rows_first = true) {
  validate(img);
  require(spec.factor > 0 && std::isfinite(spec.factor), "resample factor must be positive");
  const int out_h = resized_length(img.height, spec.factor);
  const int out_w = resized_length(img.width, spec.factor);
  if (out_h < 1 || out_w < 1)
    throw InvalidArgument("resample output would be empty for " + std::to_string(img.height) + "x" +
                          std::to_string(img.width) + " at factor " + std::to_string(spec.factor));
  if (rows_first) {
    auto tmp = detail::resize_axis(img, out_w, spec.factor, spec.antialias, true);
    return detail::resize_axis(tmp, out_h, spec.factor, spec.antialias, false);
  }
  auto tmp = detail::resize_axis(img, out_h, spec.factor, spec.antialias, false);
  return detail::resize_axis(tmp, out_w, spec.factor, spec.antialias, true);
}

/// B(.) : antialiased bicubic resize, clamped to [0, 1].
template <typename T>
BasicImage<T> bicubic_resize(const BasicImage<T>& img, const ResampleSpec& spec) {
  auto out = bicubic_resize_unclamped(img, spec);
  clamp01(out);
  return out;
}

template <typename T>
BasicImage<T> bicubic_downscale(const BasicImage<T>& img, double factor) {
  return bicubic_resize(img, ResampleSpec{factor, ResampleKernel::keys_cubic, true});
}

}  // namespace realsr

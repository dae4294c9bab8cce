#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "realsr/error.hpp"

namespace realsr {

/// Planar image: channel c occupies data[c*H*W, (c+1)*H*W). Nominal range
/// [0,1], but filtered bands are signed and are stored in the same type.
template <typename T>
struct BasicImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  BasicImage() = default;
  BasicImage(int h, int w, int c, T fill = T(0)) : height(h), width(w), channels(c) {
    require(h > 0 && w > 0, "image dimensions must be positive");
    require(c == 1 || c == 3, "image must have 1 or 3 channels");
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  T& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  T at(int c, int y, int x) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }

  std::span<T> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

  bool same_shape(const BasicImage& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  template <typename U>
  BasicImage<U> cast() const {
    BasicImage<U> out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

using Image = BasicImage<double>;

template <typename T>
void validate(const BasicImage<T>& img) {
  require(img.height > 0 && img.width > 0, "image dimensions must be positive");
  require(img.channels == 1 || img.channels == 3, "image must have 1 or 3 channels");
  require(img.data.size() == img.plane_size() * img.channels, "image data length mismatch");
  for (T v : img.data) require(std::isfinite(static_cast<double>(v)), "image contains non-finite values");
}

template <typename T>
void require_same_shape(const BasicImage<T>& a, const BasicImage<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": shape mismatch (" + std::to_string(a.height) + "x" +
                          std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                          std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                          std::to_string(b.channels) + ")");
  }
}

template <typename T>
BasicImage<T> operator+(BasicImage<T> a, const BasicImage<T>& b) {
  require_same_shape(a, b, "image add");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
  return a;
}

template <typename T>
BasicImage<T> operator-(BasicImage<T> a, const BasicImage<T>& b) {
  require_same_shape(a, b, "image subtract");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] -= b.data[i];
  return a;
}

template <typename T>
BasicImage<T> operator*(T s, BasicImage<T> a) {
  for (auto& v : a.data) v *= s;
  return a;
}

template <typename T>
void clamp01(BasicImage<T>& img) {
  for (auto& v : img.data) v = std::clamp(v, T(0), T(1));
}

template <typename T>
double max_abs_diff(const BasicImage<T>& a, const BasicImage<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

template <typename T>
double mean_squared_error(const BasicImage<T>& a, const BasicImage<T>& b) {
  require_same_shape(a, b, "mse");
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

/// Population standard deviation over all samples.
template <typename T>
double stddev(std::span<const T> v) {
  if (v.empty()) return 0.0;
  double mean = 0;
  for (T x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0;
  for (T x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

template <typename T>
double stddev(const BasicImage<T>& img) {
  return stddev(std::span<const T>(img.data));
}

/// Copy of the rectangle [y0, y0+h) x [x0, x0+w).
template <typename T>
BasicImage<T> crop(const BasicImage<T>& img, int y0, int x0, int h, int w) {
  require(y0 >= 0 && x0 >= 0 && h > 0 && w > 0 && y0 + h <= img.height && x0 + w <= img.width,
          "crop exceeds image bounds");
  BasicImage<T> out(h, w, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

enum class Flip { none, horizontal, vertical };

template <typename T>
BasicImage<T> flip(const BasicImage<T>& img, Flip f) {
  if (f == Flip::none) return img;
  BasicImage<T> out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const int sy = f == Flip::vertical ? img.height - 1 - y : y;
        const int sx = f == Flip::horizontal ? img.width - 1 - x : x;
        out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

/// Rotate counter-clockwise by quarter_turns * 90 degrees.
template <typename T>
BasicImage<T> rotate90(const BasicImage<T>& img, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  BasicImage<T> cur = img;
  for (int t = 0; t < quarter_turns; ++t) {
    BasicImage<T> out(cur.width, cur.height, cur.channels);
    for (int c = 0; c < cur.channels; ++c)
      for (int y = 0; y < cur.height; ++y)
        for (int x = 0; x < cur.width; ++x) out.at(c, cur.width - 1 - x, y) = cur.at(c, y, x);
    cur = std::move(out);
  }
  return cur;
}

}  // namespace realsr

#pragma once

// Synthetic corpora: smooth piecewise images (soft-edged shapes over colour
// gradients) whose own high-frequency content is small, so added corruptions
// dominate the high band. The edges are soft enough that a x4 bicubic
// downscale still looks smooth in the high band; with sharper edges the
// denser LR content alone tells a discriminator which scale it is looking at.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/image.hpp"
#include "realsr/rng.hpp"

namespace realsr {

struct ToyCorpusSpec {
  int count = 32;
  int size = 256;
  std::uint64_t seed = 7;
  int shapes = 7;
  double edge_width = 96.0;  // smoothstep half-width in pixels
};

namespace toy_detail {

inline double smoothstep(double e) {
  const double t = std::clamp(0.5 + 0.5 * e, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

}  // namespace toy_detail

inline Image make_toy_image(int size, std::uint64_t seed, int shapes = 7, double edge_width = 96.0) {
  require(size >= 8, "toy image size must be >= 8");
  Rng rng(seed);
  Image img(size, size, 3);
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.3, 0.7);
    gy[c] = rng.uniform(-0.15, 0.15);
    gx[c] = rng.uniform(-0.15, 0.15);
  }
  const double wave_f = rng.uniform(1.0, 3.0), wave_phase = rng.uniform(0.0, 6.28), wave_a = rng.uniform(0.02, 0.05);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = static_cast<double>(x) / size - 0.5, v = static_cast<double>(y) / size - 0.5;
        img.at(c, y, x) = base[c] + gy[c] * v + gx[c] * u + wave_a * std::sin(6.2832 * wave_f * (u + 0.7 * v) + wave_phase + c);
      }
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.1, 0.9) * size, cx = rng.uniform(0.1, 0.9) * size;
    const double ry = rng.uniform(0.06, 0.25) * size, rx = rng.uniform(0.06, 0.25) * size;
    const double angle = rng.uniform(0.0, 3.1416), ca = std::cos(angle), sa = std::sin(angle);
    double col[3];
    for (double& v : col) v = rng.uniform(0.2, 0.8);
    const double alpha = rng.uniform(0.5, 0.9);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double py = (-sa * dx + ca * dy), px = (ca * dx + sa * dy);
        double signed_dist;  // negative inside, in pixels (approximate for ellipses)
        if (ellipse) {
          const double r = std::sqrt((py / ry) * (py / ry) + (px / rx) * (px / rx));
          signed_dist = (r - 1.0) * std::min(rx, ry);
        } else {
          signed_dist = std::max(std::abs(py) - ry, std::abs(px) - rx);
        }
        const double m = alpha * toy_detail::smoothstep(-signed_dist / edge_width);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - m) * img.at(c, y, x) + m * col[c];
      }
  }
  // keep clear of the clamp so that added noise keeps its full variance
  for (auto& v : img.data) v = 0.15 + 0.7 * std::clamp(v, 0.0, 1.0);
  return img;
}

inline std::vector<Image> make_toy_corpus(const ToyCorpusSpec& spec) {
  require(spec.count >= 1, "toy corpus count must be >= 1");
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i)
    out.push_back(make_toy_image(spec.size, derive_seed(spec.seed, static_cast<std::uint64_t>(i)), spec.shapes, spec.edge_width));
  return out;
}

}  // namespace realsr

#pragma once

// Test-only helpers: seeded random inputs and finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "realsr/image.hpp"
#include "realsr/nn.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"

namespace realsr::testing {

inline Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w, c);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

inline Image constant_image(int h, int w, int c, double v) { return Image(h, w, c, v); }

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<T> t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Relative error between analytic and central-difference gradients of a
/// scalar function of the parameter set, sampled over up to `per_array`
/// entries of each trainable array. Returns the worst norm-wise relative error
/// across arrays. Arrays whose true gradient vanishes (a bias feeding batch
/// norm) are measured against a small fraction of the overall gradient scale.
inline double param_gradient_error(ParameterSet<double>& ps, const Gradients<double>& analytic,
                                   const std::function<double()>& loss, double eps, int per_array,
                                   std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0, scale = 0;
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].trainable)
      for (double v : analytic[i]) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].trainable) continue;
    const std::size_t n = ps[i].numel();
    std::vector<std::size_t> idx;
    if (n <= static_cast<std::size_t>(per_array)) {
      for (std::size_t j = 0; j < n; ++j) idx.push_back(j);
    } else {
      for (int j = 0; j < per_array; ++j) idx.push_back(rng.below(static_cast<std::uint64_t>(n)));
    }
    double num = 0, den_a = 0, den_f = 0;
    for (std::size_t j : idx) {
      double& w = ps[i].value[j];
      const double orig = w;
      w = orig + eps;
      const double lp = loss();
      w = orig - eps;
      const double lm = loss();
      w = orig;
      const double fd = (lp - lm) / (2 * eps);
      const double an = analytic[i][j];
      num += (fd - an) * (fd - an);
      den_a += an * an;
      den_f += fd * fd;
    }
    const double den = std::max({std::sqrt(std::max(den_a, den_f)), 1e-3 * scale, 1e-7});
    worst = std::max(worst, std::sqrt(num) / den);
  }
  return worst;
}

/// Same check for the gradient with respect to an input tensor.
inline double input_gradient_error(Tensor<double>& x, const Tensor<double>& analytic, const std::function<double()>& loss,
                                   double eps, int samples, std::uint64_t seed) {
  Rng rng(seed);
  double num = 0, den_a = 0, den_f = 0;
  for (int s = 0; s < samples; ++s) {
    const std::size_t j = rng.below(static_cast<std::uint64_t>(x.size()));
    const double orig = x.data[j];
    x.data[j] = orig + eps;
    const double lp = loss();
    x.data[j] = orig - eps;
    const double lm = loss();
    x.data[j] = orig;
    const double fd = (lp - lm) / (2 * eps);
    num += (fd - analytic.data[j]) * (fd - analytic.data[j]);
    den_a += analytic.data[j] * analytic.data[j];
    den_f += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(std::max(den_a, den_f)), 1e-7);
}

/// Weighted sum <r, y> used as a generic scalar loss in gradient checks.
inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() / ("realsr_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

}  // namespace realsr::testing

#pragma once

#include <cmath>

#include "realsr/nn.hpp"

namespace realsr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every trainable array; advances ps.step.
template <typename T>
void adam_step(ParameterSet<T>& ps, const Gradients<T>& g, double lr, const AdamConfig& cfg) {
  ps.step += 1;
  const double t = static_cast<double>(ps.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = ps[i];
    if (!p.trainable) continue;
    const auto& gi = g[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double gj = gi[j];
      const double m = cfg.beta1 * p.m[j] + (1.0 - cfg.beta1) * gj;
      const double v = cfg.beta2 * p.v[j] + (1.0 - cfg.beta2) * gj * gj;
      p.m[j] = static_cast<T>(m);
      p.v[j] = static_cast<T>(v);
      p.value[j] = static_cast<T>(p.value[j] - lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
    }
  }
}

}  // namespace realsr

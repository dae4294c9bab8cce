#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/kernels.hpp"
#include "realsr/nn.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"

namespace realsr {

/// Generator loss weights. Named by role: color (low band L1), texture
/// (adversarial on the high band), perceptual (full band).
struct LossWeights {
  double color = 1.0;
  double texture = 0.005;
  double perceptual = 0.01;

  static LossWeights dsgan() { return {1.0, 0.005, 0.01}; }
  static LossWeights sr() { return {0.01, 0.005, 1.0}; }

  void validate() const {
    require(color >= 0 && texture >= 0 && perceptual >= 0, "loss weights must be non-negative");
  }
};

/// Scalar loss and its gradient with respect to the first argument.
template <typename T>
struct LossGrad {
  double value = 0;
  Tensor<T> grad;
};

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": shape mismatch");
}

/// Mean absolute difference of the low-pass bands, averaged per pixel and channel.
template <typename T>
LossGrad<T> color_loss(const Tensor<T>& fake, const Tensor<T>& ref, const FilterBank& fb) {
  require_same(fake, ref, "color loss");
  const Tensor<T> lf = lowpass(fake, fb);
  const Tensor<T> lr = lowpass(ref, fb);
  const double count = static_cast<double>(fake.size());
  Tensor<T> sign(fake.n, fake.c, fake.h, fake.w);
  double sum = 0;
  for (std::size_t i = 0; i < lf.data.size(); ++i) {
    const double d = static_cast<double>(lf.data[i]) - static_cast<double>(lr.data[i]);
    sum += std::abs(d);
    sign.data[i] = static_cast<T>((d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / count);
  }
  return {sum / count, lowpass_adjoint(sign, fb)};
}

/// -mean log(sigmoid(score)) over maps and batch.
template <typename T>
LossGrad<T> adversarial_gen_loss(const Tensor<T>& scores) {
  require(scores.size() > 0, "adversarial loss: empty score map");
  const double count = static_cast<double>(scores.size());
  Tensor<T> g(scores.n, scores.c, scores.h, scores.w);
  double sum = 0;
  for (std::size_t i = 0; i < scores.data.size(); ++i) {
    const double s = scores.data[i];
    sum += softplus(-s);
    g.data[i] = static_cast<T>(-sigmoid(-s) / count);
  }
  return {sum / count, std::move(g)};
}

template <typename T>
struct DiscLoss {
  double value = 0;
  double real_term = 0;
  double fake_term = 0;
  Tensor<T> grad_real;
  Tensor<T> grad_fake;
};

/// -mean log D(real) - mean log(1 - D(fake)), D = sigmoid of the raw score.
template <typename T>
DiscLoss<T> adversarial_disc_loss(const Tensor<T>& real, const Tensor<T>& fake) {
  require(real.size() > 0 && fake.size() > 0, "discriminator loss: empty score map");
  DiscLoss<T> out;
  out.grad_real = Tensor<T>(real.n, real.c, real.h, real.w);
  out.grad_fake = Tensor<T>(fake.n, fake.c, fake.h, fake.w);
  const double nr = static_cast<double>(real.size());
  const double nf = static_cast<double>(fake.size());
  for (std::size_t i = 0; i < real.data.size(); ++i) {
    const double s = real.data[i];
    out.real_term += softplus(-s);
    out.grad_real.data[i] = static_cast<T>(-sigmoid(-s) / nr);
  }
  for (std::size_t i = 0; i < fake.data.size(); ++i) {
    const double s = fake.data[i];
    out.fake_term += softplus(s);
    out.grad_fake.data[i] = static_cast<T>(sigmoid(s) / nf);
  }
  out.real_term /= nr;
  out.fake_term /= nf;
  out.value = out.real_term + out.fake_term;
  return out;
}

enum class PerceptualMode { fixed_random_pyramid, external_pretrained };

struct PerceptualConfig {
  PerceptualMode mode = PerceptualMode::fixed_random_pyramid;
  std::uint64_t seed = 20190917;
  std::vector<int> channels{16, 32, 32};
  std::vector<double> layer_weights{1.0, 1.0, 1.0};
};

/// Feature pyramid for the perceptual distance: per level a 3x3 conv + ReLU,
/// 2x2 average pooling between levels, features unit-normalized across
/// channels at every pixel. The default weights are a fixed seeded draw;
/// externally trained weights can be dropped in via set_weights.
template <typename T>
class PerceptualExtractor {
 public:
  PerceptualExtractor() : PerceptualExtractor(PerceptualConfig{}) {}
  explicit PerceptualExtractor(const PerceptualConfig& cfg) : cfg_(cfg) {
    require(!cfg_.channels.empty(), "perceptual extractor needs at least one level");
    require(cfg_.channels.size() == cfg_.layer_weights.size(), "perceptual extractor: one weight per level");
    for (double w : cfg_.layer_weights) require(w >= 0, "perceptual layer weights must be >= 0");
    int in = 3;
    for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
      convs_.push_back(Conv2d<T>::create(params_, "level" + std::to_string(l), in, cfg_.channels[l], 3));
      in = cfg_.channels[l];
    }
    Rng rng(cfg_.seed);
    for (const auto& c : convs_) c.init(params_, rng);
  }

  const PerceptualConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  /// Replace level weights with externally trained ones (matched by name and shape).
  void set_weights(const ParameterSet<T>& src) {
    for (auto& p : params_.params) {
      const auto* q = src.find(p.name);
      if (!q || q->shape != p.shape) throw DataError("perceptual weights missing or mis-shaped: " + p.name);
      p.value = q->value;
    }
    cfg_.mode = PerceptualMode::external_pretrained;
  }

  double distance(const Tensor<T>& a, const Tensor<T>& b) const { return evaluate(a, b, false).value; }

  /// Distance and its gradient with respect to a.
  LossGrad<T> distance_and_grad(const Tensor<T>& a, const Tensor<T>& b) const { return evaluate(a, b, true); }

 private:
  struct Level {
    Tensor<T> in, pre, feat, unit;
    std::vector<T> norm;
  };

  static constexpr double kEps = 1e-10;

  std::vector<Level> features(const Tensor<T>& x) const {
    std::vector<Level> levels(convs_.size());
    Tensor<T> in = x;
    for (auto& v : in.data) v = T(2) * v - T(1);
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      Level& L = levels[l];
      if (l > 0) in = avg_pool2(levels[l - 1].feat);
      L.in = in;
      L.pre = convs_[l].forward(params_, L.in);
      L.feat = relu(L.pre);
      L.unit = L.feat;
      const std::size_t hw = L.feat.plane();
      L.norm.assign(static_cast<std::size_t>(L.feat.n) * hw, T(0));
      for (int b = 0; b < L.feat.n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          double s = 0;
          for (int c = 0; c < L.feat.c; ++c) {
            const double v = L.feat.channel(b, c)[i];
            s += v * v;
          }
          const double n = std::sqrt(s);
          L.norm[static_cast<std::size_t>(b) * hw + i] = static_cast<T>(n);
          for (int c = 0; c < L.feat.c; ++c) L.unit.channel(b, c)[i] = static_cast<T>(L.feat.channel(b, c)[i] / (n + kEps));
        }
    }
    return levels;
  }

  LossGrad<T> evaluate(const Tensor<T>& a, const Tensor<T>& b, bool want_grad) const {
    require_same(a, b, "perceptual distance");
    require(a.c == 3, "perceptual distance expects 3-channel images");
    const auto fa = features(a);
    const auto fb = features(b);
    LossGrad<T> out;
    std::vector<Tensor<T>> g_unit(convs_.size());
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      const Tensor<T>& ua = fa[l].unit;
      const Tensor<T>& ub = fb[l].unit;
      const double pixels = static_cast<double>(ua.n) * static_cast<double>(ua.plane());
      double sum = 0;
      if (want_grad) g_unit[l] = Tensor<T>(ua.n, ua.c, ua.h, ua.w);
      for (std::size_t i = 0; i < ua.data.size(); ++i) {
        const double d = static_cast<double>(ua.data[i]) - static_cast<double>(ub.data[i]);
        sum += d * d;
        if (want_grad) g_unit[l].data[i] = static_cast<T>(cfg_.layer_weights[l] * 2.0 * d / pixels);
      }
      out.value += cfg_.layer_weights[l] * sum / pixels;
    }
    if (!want_grad) return out;
    // Backward through levels, deepest first.
    Tensor<T> g_feat_next;  // gradient arriving at level l's features from level l+1
    Tensor<T> g_in;
    for (std::size_t ll = convs_.size(); ll-- > 0;) {
      const Level& L = fa[ll];
      const std::size_t hw = L.feat.plane();
      Tensor<T> g_feat(L.feat.n, L.feat.c, L.feat.h, L.feat.w);
      for (int bb = 0; bb < L.feat.n; ++bb)
        for (std::size_t i = 0; i < hw; ++i) {
          const double n = L.norm[static_cast<std::size_t>(bb) * hw + i];
          double dot = 0;
          for (int c = 0; c < L.feat.c; ++c) dot += static_cast<double>(L.feat.channel(bb, c)[i]) * g_unit[ll].channel(bb, c)[i];
          const double inv = 1.0 / (n + kEps);
          const double corr = n > 0 ? dot / (n * (n + kEps) * (n + kEps)) : 0.0;
          for (int c = 0; c < L.feat.c; ++c)
            g_feat.channel(bb, c)[i] = static_cast<T>(g_unit[ll].channel(bb, c)[i] * inv - L.feat.channel(bb, c)[i] * corr);
        }
      if (ll + 1 < convs_.size()) g_feat += g_feat_next;
      Tensor<T> g_pre = relu_backward(L.pre, std::move(g_feat));
      g_in = convs_[ll].backward(params_, L.in, g_pre, nullptr, true);
      if (ll > 0) g_feat_next = avg_pool2_backward(g_in, fa[ll - 1].feat);
    }
    for (auto& v : g_in.data) v *= T(2);  // input scaling x -> 2x - 1
    out.grad = std::move(g_in);
    return out;
  }

  static Tensor<T> avg_pool2(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, std::max(1, x.h / 2), std::max(1, x.w / 2));
    if (x.h < 2 || x.w < 2) return x;
    for (int b = 0; b < x.n; ++b)
      for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
          for (int xx = 0; xx < y.w; ++xx)
            y.at(b, c, yy, xx) = T(0.25) * (x.at(b, c, 2 * yy, 2 * xx) + x.at(b, c, 2 * yy, 2 * xx + 1) +
                                            x.at(b, c, 2 * yy + 1, 2 * xx) + x.at(b, c, 2 * yy + 1, 2 * xx + 1));
    return y;
  }

  static Tensor<T> avg_pool2_backward(const Tensor<T>& gy, const Tensor<T>& x) {
    if (x.h < 2 || x.w < 2) return gy;
    Tensor<T> gx(x.n, x.c, x.h, x.w);
    for (int b = 0; b < gy.n; ++b)
      for (int c = 0; c < gy.c; ++c)
        for (int yy = 0; yy < gy.h; ++yy)
          for (int xx = 0; xx < gy.w; ++xx) {
            const T g = T(0.25) * gy.at(b, c, yy, xx);
            gx.at(b, c, 2 * yy, 2 * xx) += g;
            gx.at(b, c, 2 * yy, 2 * xx + 1) += g;
            gx.at(b, c, 2 * yy + 1, 2 * xx) += g;
            gx.at(b, c, 2 * yy + 1, 2 * xx + 1) += g;
          }
    return gx;
  }

  PerceptualConfig cfg_;
  ParameterSet<T> params_;
  std::vector<Conv2d<T>> convs_;
};

template <typename T>
LossGrad<T> perceptual_distance(const Tensor<T>& a, const Tensor<T>& b, const PerceptualExtractor<T>& ex) {
  return ex.distance_and_grad(a, b);
}

/// Weighted generator objective with its parts kept for logging.
/// grad_image covers the color and perceptual terms (w.r.t. the generated
/// image); grad_scores is the texture term's gradient w.r.t. the raw scores,
/// which the trainer pushes back through the discriminator and the high-pass.
template <typename T>
struct GeneratorLoss {
  double total = 0;
  double color = 0;
  double texture = 0;
  double perceptual = 0;
  Tensor<T> grad_image;
  Tensor<T> grad_scores;
};

template <typename T>
GeneratorLoss<T> weighted_generator_loss(const Tensor<T>& fake, const Tensor<T>& ref, const Tensor<T>& disc_scores,
                                         const LossWeights& w, const FilterBank& color_fb,
                                         const PerceptualExtractor<T>& ex) {
  w.validate();
  GeneratorLoss<T> out;
  auto col = color_loss(fake, ref, color_fb);
  out.color = col.value;
  out.grad_image = std::move(col.grad);
  for (auto& v : out.grad_image.data) v *= static_cast<T>(w.color);
  if (disc_scores.size() > 0) {
    auto tex = adversarial_gen_loss(disc_scores);
    out.texture = tex.value;
    out.grad_scores = std::move(tex.grad);
    for (auto& v : out.grad_scores.data) v *= static_cast<T>(w.texture);
  }
  if (w.perceptual > 0) {
    auto per = ex.distance_and_grad(fake, ref);
    out.perceptual = per.value;
    for (std::size_t i = 0; i < per.grad.data.size(); ++i)
      out.grad_image.data[i] += static_cast<T>(w.perceptual) * per.grad.data[i];
  } else {
    out.perceptual = ex.distance(fake, ref);
  }
  out.total = w.color * out.color + w.texture * out.texture + w.perceptual * out.perceptual;
  return out;
}

/// L_col + 0.005 L_tex + 0.01 L_per by default; color loss against the bicubic input.
template <typename T>
GeneratorLoss<T> dsgan_generator_loss(const Tensor<T>& fake_lr, const Tensor<T>& bicubic_lr, const Tensor<T>& disc_scores,
                                      const LossWeights& w, const FilterBank& fb, const PerceptualExtractor<T>& ex) {
  return weighted_generator_loss(fake_lr, bicubic_lr, disc_scores, w, fb, ex);
}

/// L_per + 0.005 L_adv + 0.01 L_col by default; perceptual term on the full band.
template <typename T>
GeneratorLoss<T> sr_generator_loss(const Tensor<T>& sr_out, const Tensor<T>& hr_ref, const Tensor<T>& disc_scores,
                                   const LossWeights& w, const FilterBank& fb, const PerceptualExtractor<T>& ex) {
  return weighted_generator_loss(sr_out, hr_ref, disc_scores, w, fb, ex);
}

/// Combine per-component values with weights (used when components come from elsewhere).
inline double combine_losses(const LossWeights& w, double color, double texture, double perceptual) {
  return w.color * color + w.texture * texture + w.perceptual * perceptual;
}

}  // namespace realsr

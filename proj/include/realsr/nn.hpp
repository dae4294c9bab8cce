#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "realsr/error.hpp"
#include "realsr/kernels.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"

namespace realsr {

/// One named weight array with its Adam moments. Buffers (batch-norm running
/// statistics) are stored alongside but are not trainable.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> m;
  AlignedVector<T> v;
  bool trainable = true;

  std::size_t numel() const { return value.size(); }
};

template <typename T>
struct ParameterSet {
  std::vector<Param<T>> params;
  std::int64_t step = 0;  // optimizer steps taken

  std::size_t add(std::string name, std::vector<int> shape, bool trainable = true, T fill = T(0)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    Param<T> p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(n, fill);
    p.m.assign(trainable ? n : 0, T(0));
    p.v.assign(trainable ? n : 0, T(0));
    p.trainable = trainable;
    params.push_back(std::move(p));
    return params.size() - 1;
  }

  Param<T>& operator[](std::size_t i) { return params[i]; }
  const Param<T>& operator[](std::size_t i) const { return params[i]; }
  std::size_t size() const { return params.size(); }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : params)
      if (p.trainable) n += p.numel();
    return n;
  }

  const Param<T>* find(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return &p;
    return nullptr;
  }

  void zero_trainable() {
    for (auto& p : params)
      if (p.trainable) std::fill(p.value.begin(), p.value.end(), T(0));
  }

  bool all_finite() const {
    for (const auto& p : params)
      for (T v : p.value)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

/// Gradient buffers aligned with a ParameterSet (empty for buffers).
template <typename T>
struct Gradients {
  std::vector<AlignedVector<T>> grads;

  explicit Gradients(const ParameterSet<T>& ps) {
    grads.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps[i].trainable) grads[i].assign(ps[i].numel(), T(0));
  }

  AlignedVector<T>& operator[](std::size_t i) { return grads[i]; }
  const AlignedVector<T>& operator[](std::size_t i) const { return grads[i]; }

  bool all_finite() const {
    for (const auto& g : grads)
      for (T v : g)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

enum class Phase { train, eval };

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// cols[(ci*k + ky)*k + kx][y*W + x] = x[ci][reflect(y+ky-r)][reflect(x+kx-r)]
template <typename T>
void im2col_reflect(const T* x, int C, int H, int W, int k, T* cols) {
  const int r = k / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  std::vector<int> xs(static_cast<std::size_t>(W));
  for (int ci = 0; ci < C; ++ci) {
    const T* plane = x + ci * hw;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * hw;
        for (int xx = 0; xx < W; ++xx) xs[xx] = reflect_index(xx + kx - r, W);
        for (int y = 0; y < H; ++y) {
          const T* src = plane + static_cast<std::size_t>(reflect_index(y + ky - r, H)) * W;
          T* dst = row + static_cast<std::size_t>(y) * W;
          for (int xx = 0; xx < W; ++xx) dst[xx] = src[xs[xx]];
        }
      }
  }
}

template <typename T>
void col2im_reflect(const T* cols, int C, int H, int W, int k, T* gx) {
  const int r = k / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  std::fill(gx, gx + C * hw, T(0));
  std::vector<int> xs(static_cast<std::size_t>(W));
  for (int ci = 0; ci < C; ++ci) {
    T* plane = gx + ci * hw;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * hw;
        for (int xx = 0; xx < W; ++xx) xs[xx] = reflect_index(xx + kx - r, W);
        for (int y = 0; y < H; ++y) {
          T* dst = plane + static_cast<std::size_t>(reflect_index(y + ky - r, H)) * W;
          const T* src = row + static_cast<std::size_t>(y) * W;
          for (int xx = 0; xx < W; ++xx) dst[xs[xx]] += src[xx];
        }
      }
  }
}

}  // namespace detail

/// Stride-1 "same" convolution with reflection padding.
template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 3;
  std::size_t weight = 0, bias = 0;

  static Conv2d create(ParameterSet<T>& ps, const std::string& name, int in_ch, int out_ch, int k) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.k = k;
    c.weight = ps.add(name + ".weight", {out_ch, in_ch, k, k});
    c.bias = ps.add(name + ".bias", {out_ch});
    return c;
  }

  std::size_t param_count() const { return static_cast<std::size_t>(out_ch) * in_ch * k * k + out_ch; }

  /// Kaiming-normal (fan-in) weights times gain; zero bias.
  void init(ParameterSet<T>& ps, Rng& rng, double gain = 1.0) const {
    const double std = gain * std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (auto& v : ps[weight].value) v = static_cast<T>(std * rng.normal());
    std::fill(ps[bias].value.begin(), ps[bias].value.end(), T(0));
  }

  Tensor<T> forward(const ParameterSet<T>& ps, const Tensor<T>& x) const {
    require(x.c == in_ch, "conv input channel mismatch");
    Tensor<T> y(x.n, out_ch, x.h, x.w);
    const std::size_t hw = x.plane();
    const int ckk = in_ch * k * k;
    AlignedVector<T> cols(static_cast<std::size_t>(ckk) * hw);
    detail::ConstMatMap<T> W(ps[weight].value.data(), out_ch, ckk);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(ps[bias].value.data(), out_ch);
    for (int i = 0; i < x.n; ++i) {
      const T* src = x.item(i);
      detail::MatMap<T> Y(y.item(i), out_ch, static_cast<Eigen::Index>(hw));
      if (k == 1) {
        detail::ConstMatMap<T> X(src, in_ch, static_cast<Eigen::Index>(hw));
        Y.noalias() = W * X;
      } else {
        detail::im2col_reflect(src, in_ch, x.h, x.w, k, cols.data());
        detail::ConstMatMap<T> X(cols.data(), ckk, static_cast<Eigen::Index>(hw));
        Y.noalias() = W * X;
      }
      Y.colwise() += b;
    }
    return y;
  }

  /// Accumulates parameter gradients into g (if given); returns dL/dx when want_input_grad.
  Tensor<T> backward(const ParameterSet<T>& ps, const Tensor<T>& x, const Tensor<T>& gy, Gradients<T>* g,
                     bool want_input_grad) const {
    const std::size_t hw = x.plane();
    const int ckk = in_ch * k * k;
    Tensor<T> gx;
    if (want_input_grad) gx = Tensor<T>(x.n, x.c, x.h, x.w);
    AlignedVector<T> cols(static_cast<std::size_t>(ckk) * hw);
    detail::ConstMatMap<T> W(ps[weight].value.data(), out_ch, ckk);
    for (int i = 0; i < x.n; ++i) {
      detail::ConstMatMap<T> GY(gy.item(i), out_ch, static_cast<Eigen::Index>(hw));
      if (g) {
        detail::MatMap<T> GW((*g)[weight].data(), out_ch, ckk);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> GB((*g)[bias].data(), out_ch);
        if (k == 1) {
          detail::ConstMatMap<T> X(x.item(i), in_ch, static_cast<Eigen::Index>(hw));
          GW.noalias() += GY * X.transpose();
        } else {
          detail::im2col_reflect(x.item(i), in_ch, x.h, x.w, k, cols.data());
          detail::ConstMatMap<T> X(cols.data(), ckk, static_cast<Eigen::Index>(hw));
          GW.noalias() += GY * X.transpose();
        }
        GB += GY.rowwise().sum();
      }
      if (want_input_grad) {
        if (k == 1) {
          detail::MatMap<T> GX(gx.item(i), in_ch, static_cast<Eigen::Index>(hw));
          GX.noalias() = W.transpose() * GY;
        } else {
          detail::MatMap<T> GC(cols.data(), ckk, static_cast<Eigen::Index>(hw));
          GC.noalias() = W.transpose() * GY;
          detail::col2im_reflect(cols.data(), in_ch, x.h, x.w, k, gx.item(i));
        }
      }
    }
    return gx;
  }
};

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (auto& v : x.data) v = v > T(0) ? v : T(0);
  return x;
}

/// Gradient of relu given its pre-activation input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, Tensor<T> gy) {
  for (std::size_t i = 0; i < gy.data.size(); ++i)
    if (!(pre.data[i] > T(0))) gy.data[i] = T(0);
  return gy;
}

template <typename T>
Tensor<T> leaky_relu(Tensor<T> x, T slope) {
  for (auto& v : x.data) v = v > T(0) ? v : v * slope;
  return x;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& pre, Tensor<T> gy, T slope) {
  for (std::size_t i = 0; i < gy.data.size(); ++i)
    if (!(pre.data[i] > T(0))) gy.data[i] *= slope;
  return gy;
}

/// Per-channel batch normalization with learnable affine and running statistics.
template <typename T>
struct BatchNorm2d {
  int channels = 0;
  std::size_t gamma = 0, beta = 0, running_mean = 0, running_var = 0;
  double momentum = 0.1;
  double eps = 1e-5;

  struct Cache {
    Phase phase = Phase::eval;
    std::vector<T> inv_std;
    Tensor<T> xhat;
  };

  static BatchNorm2d create(ParameterSet<T>& ps, const std::string& name, int channels) {
    BatchNorm2d bn;
    bn.channels = channels;
    bn.gamma = ps.add(name + ".gamma", {channels}, true, T(1));
    bn.beta = ps.add(name + ".beta", {channels}, true, T(0));
    bn.running_mean = ps.add(name + ".running_mean", {channels}, false, T(0));
    bn.running_var = ps.add(name + ".running_var", {channels}, false, T(1));
    return bn;
  }

  std::size_t param_count() const { return 2 * static_cast<std::size_t>(channels); }

  /// Train phase normalizes with batch statistics and updates the running ones.
  Tensor<T> forward(ParameterSet<T>& ps, const Tensor<T>& x, Phase phase, Cache* cache) const {
    require(x.c == channels, "batch-norm channel mismatch");
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t hw = x.plane();
    const double count = static_cast<double>(x.n) * static_cast<double>(hw);
    std::vector<T> inv(static_cast<std::size_t>(channels));
    Tensor<T> xhat(x.n, x.c, x.h, x.w);
    for (int ch = 0; ch < channels; ++ch) {
      double mean, var;
      if (phase == Phase::train) {
        double s = 0;
        for (int b = 0; b < x.n; ++b) {
          const T* p = x.channel(b, ch);
          for (std::size_t i = 0; i < hw; ++i) s += p[i];
        }
        mean = s / count;
        double s2 = 0;
        for (int b = 0; b < x.n; ++b) {
          const T* p = x.channel(b, ch);
          for (std::size_t i = 0; i < hw; ++i) s2 += (p[i] - mean) * (p[i] - mean);
        }
        var = s2 / count;
        auto& rm = ps[running_mean].value[ch];
        auto& rv = ps[running_var].value[ch];
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        rm = static_cast<T>((1 - momentum) * rm + momentum * mean);
        rv = static_cast<T>((1 - momentum) * rv + momentum * unbiased);
      } else {
        mean = ps[running_mean].value[ch];
        var = ps[running_var].value[ch];
      }
      const double is = 1.0 / std::sqrt(var + eps);
      inv[ch] = static_cast<T>(is);
      const T gm = ps[gamma].value[ch];
      const T bt = ps[beta].value[ch];
      for (int b = 0; b < x.n; ++b) {
        const T* p = x.channel(b, ch);
        T* xh = xhat.channel(b, ch);
        T* q = y.channel(b, ch);
        for (std::size_t i = 0; i < hw; ++i) {
          xh[i] = static_cast<T>((p[i] - mean) * is);
          q[i] = gm * xh[i] + bt;
        }
      }
    }
    if (cache) {
      cache->phase = phase;
      cache->inv_std = std::move(inv);
      cache->xhat = std::move(xhat);
    }
    return y;
  }

  Tensor<T> backward(const ParameterSet<T>& ps, const Cache& cache, const Tensor<T>& gy, Gradients<T>* g) const {
    const Tensor<T>& xhat = cache.xhat;
    Tensor<T> gx(gy.n, gy.c, gy.h, gy.w);
    const std::size_t hw = gy.plane();
    const double count = static_cast<double>(gy.n) * static_cast<double>(hw);
    for (int ch = 0; ch < channels; ++ch) {
      double sum_g = 0, sum_gx = 0;
      for (int b = 0; b < gy.n; ++b) {
        const T* gp = gy.channel(b, ch);
        const T* xh = xhat.channel(b, ch);
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += gp[i];
          sum_gx += gp[i] * xh[i];
        }
      }
      if (g) {
        (*g)[gamma][ch] += static_cast<T>(sum_gx);
        (*g)[beta][ch] += static_cast<T>(sum_g);
      }
      const double gm = ps[gamma].value[ch];
      const double is = cache.inv_std[ch];
      for (int b = 0; b < gy.n; ++b) {
        const T* gp = gy.channel(b, ch);
        const T* xh = xhat.channel(b, ch);
        T* out = gx.channel(b, ch);
        if (cache.phase == Phase::train) {
          for (std::size_t i = 0; i < hw; ++i)
            out[i] = static_cast<T>(gm * is * (gp[i] - sum_g / count - xh[i] * sum_gx / count));
        } else {
          for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<T>(gm * is * gp[i]);
        }
      }
    }
    return gx;
  }
};

/// (N, C*r*r, H, W) -> (N, C, H*r, W*r); channel c*r*r + i*r + j feeds offset (i, j).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  require(x.c % (r * r) == 0, "pixel shuffle channel count must be divisible by r^2");
  const int oc = x.c / (r * r);
  Tensor<T> y(x.n, oc, x.h * r, x.w * r);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          const T* src = x.channel(b, c * r * r + i * r + j);
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) y.at(b, c, yy * r + i, xx * r + j) = src[yy * x.w + xx];
        }
  return y;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& y, int r) {
  Tensor<T> x(y.n, y.c * r * r, y.h / r, y.w / r);
  for (int b = 0; b < y.n; ++b)
    for (int c = 0; c < y.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          T* dst = x.channel(b, c * r * r + i * r + j);
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) dst[yy * x.w + xx] = y.at(b, c, yy * r + i, xx * r + j);
        }
  return x;
}

/// Fixed bilinear upsampling, half-pixel centers, edge clamp.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, int scale) {
  Tensor<T> y(x.n, x.c, x.h * scale, x.w * scale);
  auto axis = [scale](int out_len, int in_len, std::vector<int>& i0, std::vector<int>& i1, std::vector<T>& f) {
    i0.resize(out_len);
    i1.resize(out_len);
    f.resize(out_len);
    for (int u = 0; u < out_len; ++u) {
      double s = (u + 0.5) / scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in_len - 1));
      const int a = static_cast<int>(std::floor(s));
      i0[u] = a;
      i1[u] = std::min(a + 1, in_len - 1);
      f[u] = static_cast<T>(s - a);
    }
  };
  std::vector<int> y0, y1, x0, x1;
  std::vector<T> fy, fx;
  axis(y.h, x.h, y0, y1, fy);
  axis(y.w, x.w, x0, x1, fx);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c) {
      const T* src = x.channel(b, c);
      T* dst = y.channel(b, c);
      for (int u = 0; u < y.h; ++u) {
        const T* r0 = src + static_cast<std::size_t>(y0[u]) * x.w;
        const T* r1 = src + static_cast<std::size_t>(y1[u]) * x.w;
        for (int v = 0; v < y.w; ++v) {
          const T top = r0[x0[v]] + fx[v] * (r0[x1[v]] - r0[x0[v]]);
          const T bot = r1[x0[v]] + fx[v] * (r1[x1[v]] - r1[x0[v]]);
          dst[static_cast<std::size_t>(u) * y.w + v] = top + fy[u] * (bot - top);
        }
      }
    }
  return y;
}

/// Apply a filter bank's low-pass (or high-pass) to every plane of a batch.
template <typename T>
Tensor<T> lowpass(const Tensor<T>& x, const FilterBank& fb) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      lowpass_plane<T>({x.channel(b, c), x.plane()}, {y.channel(b, c), y.plane()}, x.h, x.w, fb);
  return y;
}

template <typename T>
Tensor<T> lowpass_adjoint(const Tensor<T>& gy, const FilterBank& fb) {
  Tensor<T> gx(gy.n, gy.c, gy.h, gy.w);
  for (int b = 0; b < gy.n; ++b)
    for (int c = 0; c < gy.c; ++c)
      lowpass_plane_adjoint<T>({gy.channel(b, c), gy.plane()}, {gx.channel(b, c), gx.plane()}, gy.h, gy.w, fb);
  return gx;
}

template <typename T>
Tensor<T> highpass(const Tensor<T>& x, const FilterBank& fb) {
  Tensor<T> y = lowpass(x, fb);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = x.data[i] - y.data[i];
  return y;
}

template <typename T>
Tensor<T> highpass_adjoint(const Tensor<T>& gy, const FilterBank& fb) {
  Tensor<T> gx = lowpass_adjoint(gy, fb);
  for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] = gy.data[i] - gx.data[i];
  return gx;
}

}  // namespace realsr

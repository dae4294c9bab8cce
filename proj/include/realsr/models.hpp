#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "realsr/error.hpp"
#include "realsr/nn.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"

namespace realsr {

struct GeneratorSpec {
  int num_residual_blocks = 8;
  int features = 64;
  int kernel_size = 3;
  bool global_skip = true;

  void validate() const {
    require(num_residual_blocks >= 0, "generator: num_residual_blocks must be >= 0");
    require(features >= 1, "generator: features must be positive");
    require(kernel_size >= 1 && kernel_size % 2 == 1, "generator: kernel_size must be odd");
  }
};

struct DiscriminatorSpec {
  int layers = 4;
  int kernel_size = 5;
  std::vector<int> feature_plan{64, 128, 256, 1};
  std::vector<int> strides{1, 1, 1, 1};
  double leaky_slope = 0.2;

  void validate() const {
    require(layers == 4, "discriminator: exactly 4 layers are supported");
    require(feature_plan.size() == 4 && feature_plan.back() == 1, "discriminator: feature plan must have 4 entries ending in 1");
    for (int f : feature_plan) require(f >= 1, "discriminator: feature counts must be positive");
    require(strides.size() == 4, "discriminator: need 4 strides");
    for (int s : strides) require(s == 1, "discriminator: only stride 1 is supported");
    require(kernel_size >= 1 && kernel_size % 2 == 1, "discriminator: kernel_size must be odd");
  }

  /// Side length of one score's input footprint.
  int receptive_field() const { return layers * (kernel_size - 1) + 1; }
};

struct SRGeneratorSpec {
  int num_blocks = 8;
  int features = 64;
  int upscale_factor = 4;

  void validate() const {
    require(num_blocks >= 0, "sr generator: num_blocks must be >= 0");
    require(features >= 1, "sr generator: features must be positive");
    require(upscale_factor == 4, "sr generator: only x4 upscaling is supported");
  }
};

template <typename T>
void require_input(const Tensor<T>& x, int channels, const char* who) {
  require(x.n >= 1 && x.h >= 1 && x.w >= 1, std::string(who) + ": empty input");
  require(x.c == channels, std::string(who) + ": expected " + std::to_string(channels) + " input channels");
}

/// Translation network G_d: head conv, residual blocks, output conv, optional
/// global skip from the input. Image size is preserved.
template <typename T>
class DsganGenerator {
 public:
  struct Trace {
    Tensor<T> input;
    std::vector<Tensor<T>> block_in;  // last entry feeds the output conv
    std::vector<Tensor<T>> block_pre;  // first conv output before ReLU
  };

  DsganGenerator() = default;
  DsganGenerator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    const int f = spec_.features, k = spec_.kernel_size;
    head_ = Conv2d<T>::create(params_, "head", 3, f, k);
    for (int i = 0; i < spec_.num_residual_blocks; ++i) {
      const std::string p = "block" + std::to_string(i);
      conv_a_.push_back(Conv2d<T>::create(params_, p + ".conv1", f, f, k));
      conv_b_.push_back(Conv2d<T>::create(params_, p + ".conv2", f, f, k));
    }
    tail_ = Conv2d<T>::create(params_, "tail", f, 3, k);
    Rng rng(seed);
    head_.init(params_, rng);
    for (std::size_t i = 0; i < conv_a_.size(); ++i) {
      conv_a_[i].init(params_, rng);
      conv_b_[i].init(params_, rng);
    }
    tail_.init(params_, rng, 0.1);
  }

  const GeneratorSpec& spec() const { return spec_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const {
    require_input(x, 3, "dsgan generator");
    if (trace) {
      trace->input = x;
      trace->block_in.clear();
      trace->block_pre.clear();
    }
    Tensor<T> h = head_.forward(params_, x);
    for (std::size_t i = 0; i < conv_a_.size(); ++i) {
      Tensor<T> a = conv_a_[i].forward(params_, h);
      Tensor<T> c = conv_b_[i].forward(params_, relu(a));
      if (trace) {
        trace->block_in.push_back(h);
        trace->block_pre.push_back(std::move(a));
      }
      h += c;
    }
    Tensor<T> y = tail_.forward(params_, h);
    if (trace) trace->block_in.push_back(std::move(h));
    if (spec_.global_skip) y += x;
    return y;
  }

  /// Backpropagates gy; parameter gradients go to g, returns dL/dinput if requested.
  Tensor<T> backward(const Trace& t, const Tensor<T>& gy, Gradients<T>* g, bool want_input_grad = false) const {
    Tensor<T> gh = tail_.backward(params_, t.block_in.back(), gy, g, true);
    for (std::size_t ii = conv_a_.size(); ii-- > 0;) {
      const Tensor<T> b = relu(t.block_pre[ii]);
      Tensor<T> gb = conv_b_[ii].backward(params_, b, gh, g, true);
      Tensor<T> ga = relu_backward(t.block_pre[ii], std::move(gb));
      gh += conv_a_[ii].backward(params_, t.block_in[ii], ga, g, true);
    }
    Tensor<T> gx = head_.backward(params_, t.input, gh, g, want_input_grad);
    if (want_input_grad && spec_.global_skip) gx += gy;
    return gx;
  }

 private:
  GeneratorSpec spec_;
  ParameterSet<T> params_;
  Conv2d<T> head_, tail_;
  std::vector<Conv2d<T>> conv_a_, conv_b_;
};

/// Fully convolutional patch discriminator emitting one raw score per pixel.
template <typename T>
class PatchDiscriminator {
 public:
  struct Trace {
    Tensor<T> input;
    Tensor<T> pre1, pre2, pre3;  // pre-activation values
    Tensor<T> act1, act2, act3;
    typename BatchNorm2d<T>::Cache bn2, bn3;
  };

  PatchDiscriminator() = default;
  PatchDiscriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    const auto& f = spec_.feature_plan;
    const int k = spec_.kernel_size;
    conv1_ = Conv2d<T>::create(params_, "conv1", 3, f[0], k);
    conv2_ = Conv2d<T>::create(params_, "conv2", f[0], f[1], k);
    bn2_ = BatchNorm2d<T>::create(params_, "bn2", f[1]);
    conv3_ = Conv2d<T>::create(params_, "conv3", f[1], f[2], k);
    bn3_ = BatchNorm2d<T>::create(params_, "bn3", f[2]);
    conv4_ = Conv2d<T>::create(params_, "conv4", f[2], f[3], k);
    Rng rng(seed);
    conv1_.init(params_, rng);
    conv2_.init(params_, rng);
    conv3_.init(params_, rng);
    conv4_.init(params_, rng);
  }

  const DiscriminatorSpec& spec() const { return spec_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  /// Train phase uses batch statistics and updates the running estimates.
  Tensor<T> forward(const Tensor<T>& x, Phase phase, Trace* trace = nullptr) {
    return run(params_, x, phase, trace);
  }

  /// Evaluation-mode scores; does not touch any state.
  Tensor<T> infer(const Tensor<T>& x) const {
    ParameterSet<T>& ps = const_cast<ParameterSet<T>&>(params_);  // eval phase never writes
    return const_cast<PatchDiscriminator*>(this)->run(ps, x, Phase::eval, nullptr);
  }

  Tensor<T> backward(const Trace& t, const Tensor<T>& gy, Gradients<T>* g, bool want_input_grad = true) const {
    const T s = static_cast<T>(spec_.leaky_slope);
    Tensor<T> ga3 = conv4_.backward(params_, t.act3, gy, g, true);
    Tensor<T> gp3 = bn3_.backward(params_, t.bn3, leaky_relu_backward(t.pre3, std::move(ga3), s), g);
    Tensor<T> ga2 = conv3_.backward(params_, t.act2, gp3, g, true);
    Tensor<T> gp2 = bn2_.backward(params_, t.bn2, leaky_relu_backward(t.pre2, std::move(ga2), s), g);
    Tensor<T> ga1 = conv2_.backward(params_, t.act1, gp2, g, true);
    Tensor<T> gp1 = leaky_relu_backward(t.pre1, std::move(ga1), s);
    return conv1_.backward(params_, t.input, gp1, g, want_input_grad);
  }

 private:
  Tensor<T> run(ParameterSet<T>& ps, const Tensor<T>& x, Phase phase, Trace* trace) {
    require_input(x, 3, "patch discriminator");
    const int rf = spec_.receptive_field();
    if (x.h < rf || x.w < rf)
      throw InvalidArgument("patch discriminator: input " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                            " is smaller than the receptive field " + std::to_string(rf));
    const T s = static_cast<T>(spec_.leaky_slope);
    Trace local;
    Trace& t = trace ? *trace : local;
    t.input = x;
    t.pre1 = conv1_.forward(ps, x);
    t.act1 = leaky_relu(t.pre1, s);
    t.pre2 = bn2_.forward(ps, conv2_.forward(ps, t.act1), phase, &t.bn2);
    t.act2 = leaky_relu(t.pre2, s);
    t.pre3 = bn3_.forward(ps, conv3_.forward(ps, t.act2), phase, &t.bn3);
    t.act3 = leaky_relu(t.pre3, s);
    return conv4_.forward(ps, t.act3);
  }

  DiscriminatorSpec spec_;
  ParameterSet<T> params_;
  Conv2d<T> conv1_, conv2_, conv3_, conv4_;
  BatchNorm2d<T> bn2_, bn3_;
};

/// x4 residual SR network: head conv, residual body with a long skip, two
/// (conv, pixel shuffle x2, ReLU) stages and an output conv, added to a
/// fixed bilinear x4 upsampling of the input.
template <typename T>
class SRGenerator {
 public:
  struct Trace {
    Tensor<T> input;
    Tensor<T> head_out;
    std::vector<Tensor<T>> block_in;
    std::vector<Tensor<T>> block_pre;
    Tensor<T> body_in;  // input of the body conv (last block output)
    Tensor<T> up_in1, up_pre1, up_in2, up_pre2, tail_in;
  };

  SRGenerator() = default;
  SRGenerator(const SRGeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    const int f = spec_.features;
    head_ = Conv2d<T>::create(params_, "head", 3, f, 3);
    for (int i = 0; i < spec_.num_blocks; ++i) {
      const std::string p = "block" + std::to_string(i);
      conv_a_.push_back(Conv2d<T>::create(params_, p + ".conv1", f, f, 3));
      conv_b_.push_back(Conv2d<T>::create(params_, p + ".conv2", f, f, 3));
    }
    body_ = Conv2d<T>::create(params_, "body", f, f, 3);
    up1_ = Conv2d<T>::create(params_, "up1", f, 4 * f, 3);
    up2_ = Conv2d<T>::create(params_, "up2", f, 4 * f, 3);
    tail_ = Conv2d<T>::create(params_, "tail", f, 3, 3);
    Rng rng(seed);
    head_.init(params_, rng);
    for (std::size_t i = 0; i < conv_a_.size(); ++i) {
      conv_a_[i].init(params_, rng);
      conv_b_[i].init(params_, rng);
    }
    body_.init(params_, rng);
    up1_.init(params_, rng);
    up2_.init(params_, rng);
    tail_.init(params_, rng, 0.1);
  }

  const SRGeneratorSpec& spec() const { return spec_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const {
    require_input(x, 3, "sr generator");
    Trace local;
    Trace& t = trace ? *trace : local;
    const bool keep = trace != nullptr;
    t.block_in.clear();
    t.block_pre.clear();
    if (keep) t.input = x;
    Tensor<T> head = head_.forward(params_, x);
    Tensor<T> h = head;
    for (std::size_t i = 0; i < conv_a_.size(); ++i) {
      Tensor<T> a = conv_a_[i].forward(params_, h);
      Tensor<T> c = conv_b_[i].forward(params_, relu(a));
      if (keep) {
        t.block_in.push_back(h);
        t.block_pre.push_back(std::move(a));
      }
      h += c;
    }
    Tensor<T> body = body_.forward(params_, h);
    body += head;
    if (keep) {
      t.head_out = std::move(head);
      t.body_in = std::move(h);
    }
    Tensor<T> pre1 = pixel_shuffle(up1_.forward(params_, body), 2);
    Tensor<T> act1 = relu(pre1);
    Tensor<T> pre2 = pixel_shuffle(up2_.forward(params_, act1), 2);
    Tensor<T> act2 = relu(pre2);
    Tensor<T> y = tail_.forward(params_, act2);
    y += bilinear_upsample(x, 4);
    if (keep) {
      t.up_in1 = std::move(body);
      t.up_pre1 = std::move(pre1);
      t.up_in2 = std::move(act1);
      t.up_pre2 = std::move(pre2);
      t.tail_in = std::move(act2);
    }
    return y;
  }

  /// Parameter gradients only; the input path is data, not learnable.
  void backward(const Trace& t, const Tensor<T>& gy, Gradients<T>* g) const {
    Tensor<T> g_act2 = tail_.backward(params_, t.tail_in, gy, g, true);
    Tensor<T> g_up2 = pixel_unshuffle(relu_backward(t.up_pre2, std::move(g_act2)), 2);
    Tensor<T> g_act1 = up2_.backward(params_, t.up_in2, g_up2, g, true);
    Tensor<T> g_up1 = pixel_unshuffle(relu_backward(t.up_pre1, std::move(g_act1)), 2);
    Tensor<T> g_body = up1_.backward(params_, t.up_in1, g_up1, g, true);
    Tensor<T> gh = body_.backward(params_, t.body_in, g_body, g, true);
    for (std::size_t ii = conv_a_.size(); ii-- > 0;) {
      const Tensor<T> b = relu(t.block_pre[ii]);
      Tensor<T> gb = conv_b_[ii].backward(params_, b, gh, g, true);
      Tensor<T> ga = relu_backward(t.block_pre[ii], std::move(gb));
      gh += conv_a_[ii].backward(params_, t.block_in[ii], ga, g, true);
    }
    gh += g_body;  // long skip from the head output
    head_.backward(params_, t.input, gh, g, false);
  }

 private:
  SRGeneratorSpec spec_;
  ParameterSet<T> params_;
  Conv2d<T> head_, body_, up1_, up2_, tail_;
  std::vector<Conv2d<T>> conv_a_, conv_b_;
};

}  // namespace realsr

#include <gtest/gtest.h>

#include <cmath>

#include "realsr/metrics.hpp"
#include "realsr/models.hpp"
#include "realsr/resample.hpp"
#include "support/test_helpers.hpp"

namespace realsr {
namespace {

using testing::dot;
using testing::input_gradient_error;
using testing::param_gradient_error;
using testing::random_tensor;

// Independent closed-form parameter counters.
std::size_t conv_params(std::size_t k, std::size_t cin, std::size_t cout) { return k * k * cin * cout + cout; }

std::size_t dsgan_generator_count(const GeneratorSpec& s) {
  const std::size_t f = s.features, k = s.kernel_size;
  return conv_params(k, 3, f) + 2 * s.num_residual_blocks * conv_params(k, f, f) + conv_params(k, f, 3);
}

std::size_t discriminator_count(const DiscriminatorSpec& s) {
  const auto& f = s.feature_plan;
  const std::size_t k = s.kernel_size;
  return conv_params(k, 3, f[0]) + conv_params(k, f[0], f[1]) + 2 * f[1] + conv_params(k, f[1], f[2]) + 2 * f[2] +
         conv_params(k, f[2], f[3]);
}

std::size_t sr_generator_count(const SRGeneratorSpec& s) {
  const std::size_t f = s.features;
  return conv_params(3, 3, f) + 2 * s.num_blocks * conv_params(3, f, f) + conv_params(3, f, f) +
         2 * conv_params(3, f, 4 * f) + conv_params(3, f, 3);
}

TEST(DsganGenerator, ZeroWeightsIsIdentity) {
  DsganGenerator<double> g(GeneratorSpec{2, 8, 3, true}, 1);
  g.params().zero_trainable();
  const auto x = random_tensor<double>(2, 3, 12, 10, 3);
  const auto y = g.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data[i], x.data[i]);
}

TEST(DsganGenerator, ShapeAndParameterCount) {
  GeneratorSpec spec;  // defaults: 8 blocks, 64 features
  DsganGenerator<float> g(spec, 7);
  EXPECT_EQ(g.params().trainable_count(), dsgan_generator_count(spec));
  const auto y = g.forward(random_tensor<float>(1, 3, 64, 64, 1));
  EXPECT_EQ(y.n, 1);
  EXPECT_EQ(y.c, 3);
  EXPECT_EQ(y.h, 64);
  EXPECT_EQ(y.w, 64);
}

TEST(DsganGenerator, RejectsBadSpec) {
  EXPECT_THROW((DsganGenerator<float>(GeneratorSpec{2, 0, 3, true}, 0)), InvalidArgument);
  EXPECT_THROW((DsganGenerator<float>(GeneratorSpec{2, 8, 4, true}, 0)), InvalidArgument);
}

TEST(DsganGenerator, GradientsMatchFiniteDifferences) {
  DsganGenerator<double> g(GeneratorSpec{2, 8, 3, true}, 11);
  auto x = random_tensor<double>(2, 3, 7, 6, 5);
  const auto r = random_tensor<double>(2, 3, 7, 6, 6, -1, 1);
  DsganGenerator<double>::Trace t;
  g.forward(x, &t);
  Gradients<double> grads(g.params());
  const auto gx = g.backward(t, r, &grads, true);
  auto loss = [&] { return dot(r, g.forward(x)); };
  EXPECT_LT(param_gradient_error(g.params(), grads, loss, 1e-6, 12, 1), 1e-4);
  EXPECT_LT(input_gradient_error(x, gx, loss, 1e-6, 40, 2), 1e-4);
}

TEST(DsganGenerator, DeterministicInitialisation) {
  DsganGenerator<float> a(GeneratorSpec{2, 8, 3, true}, 42), b(GeneratorSpec{2, 8, 3, true}, 42);
  const auto x = random_tensor<float>(1, 3, 9, 9, 1);
  EXPECT_EQ(a.forward(x).data, b.forward(x).data);
  DsganGenerator<float> c(GeneratorSpec{2, 8, 3, true}, 43);
  EXPECT_NE(a.forward(x).data, c.forward(x).data);
}

TEST(PatchDiscriminator, ScoreMapShapeAndCount) {
  DiscriminatorSpec spec;
  PatchDiscriminator<float> d(spec, 3);
  EXPECT_EQ(d.params().trainable_count(), discriminator_count(spec));
  const auto s = d.infer(random_tensor<float>(1, 3, 128, 128, 2));
  EXPECT_EQ(s.c, 1);
  EXPECT_EQ(s.h, 128);
  EXPECT_EQ(s.w, 128);
}

TEST(PatchDiscriminator, ZeroWeightsGiveHalfProbability) {
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {4, 6, 8, 1}, {1, 1, 1, 1}, 0.2}, 3);
  d.params().zero_trainable();
  const auto s = d.forward(random_tensor<double>(2, 3, 20, 20, 2), Phase::train);
  for (double v : s.data) {
    EXPECT_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(sigmoid(v), 0.5);
  }
}

TEST(PatchDiscriminator, RejectsInputSmallerThanReceptiveField) {
  PatchDiscriminator<float> d(DiscriminatorSpec{4, 5, {4, 6, 8, 1}, {1, 1, 1, 1}, 0.2}, 3);
  EXPECT_EQ(d.spec().receptive_field(), 17);
  EXPECT_THROW(d.infer(random_tensor<float>(1, 3, 16, 40, 1)), InvalidArgument);
  EXPECT_NO_THROW(d.infer(random_tensor<float>(1, 3, 17, 17, 1)));
  EXPECT_THROW((PatchDiscriminator<float>(DiscriminatorSpec{4, 5, {4, 6, 8, 1}, {1, 2, 1, 1}, 0.2}, 0)), InvalidArgument);
}

TEST(PatchDiscriminator, TranslationCovariantInInterior) {
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {4, 6, 8, 1}, {1, 1, 1, 1}, 0.2}, 9);
  d.forward(random_tensor<double>(2, 3, 24, 24, 4), Phase::train);  // non-trivial running stats
  const int n = 40, shift = 2;
  const auto x = random_tensor<double>(1, 3, n, n, 5);
  Tensor<double> xs(1, 3, n, n);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int xx = 0; xx < n; ++xx) xs.at(0, c, y, xx) = x.at(0, c, y, std::max(0, xx - shift));
  const auto a = d.infer(x);
  const auto b = d.infer(xs);
  const int margin = 8 + shift + 1;
  for (int y = margin; y < n - margin; ++y)
    for (int xx = margin; xx < n - margin; ++xx) EXPECT_NEAR(b.at(0, 0, y, xx), a.at(0, 0, y, xx - shift), 1e-9);
}

TEST(PatchDiscriminator, PerturbationStaysInsideReceptiveField) {
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {4, 6, 8, 1}, {1, 1, 1, 1}, 0.2}, 9);
  const int n = 48;
  auto x = random_tensor<double>(1, 3, n, n, 5);
  const auto a = d.infer(x);
  x.at(0, 1, 24, 20) += 0.5;
  const auto b = d.infer(x);
  int changed = 0;
  for (int y = 0; y < n; ++y)
    for (int xx = 0; xx < n; ++xx) {
      const bool diff = a.at(0, 0, y, xx) != b.at(0, 0, y, xx);
      if (diff) {
        ++changed;
        EXPECT_LE(std::abs(y - 24), 8);
        EXPECT_LE(std::abs(xx - 20), 8);
      }
    }
  EXPECT_GT(changed, 0);
}

TEST(PatchDiscriminator, GradientsMatchFiniteDifferencesTrainPhase) {
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {3, 4, 5, 1}, {1, 1, 1, 1}, 0.2}, 21);
  auto x = random_tensor<double>(2, 3, 18, 18, 8, -1, 1);
  const auto r = random_tensor<double>(2, 1, 18, 18, 9, -1, 1);
  PatchDiscriminator<double>::Trace t;
  d.forward(x, Phase::train, &t);
  Gradients<double> grads(d.params());
  const auto gx = d.backward(t, r, &grads, true);
  auto loss = [&] { return dot(r, d.forward(x, Phase::train)); };
  EXPECT_LT(param_gradient_error(d.params(), grads, loss, 1e-6, 12, 3), 1e-4);
  EXPECT_LT(input_gradient_error(x, gx, loss, 1e-6, 40, 4), 1e-4);
}

TEST(PatchDiscriminator, GradientsMatchFiniteDifferencesEvalPhase) {
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {3, 4, 5, 1}, {1, 1, 1, 1}, 0.2}, 22);
  d.forward(random_tensor<double>(2, 3, 18, 18, 1), Phase::train);
  auto x = random_tensor<double>(1, 3, 18, 18, 8, -1, 1);
  const auto r = random_tensor<double>(1, 1, 18, 18, 9, -1, 1);
  PatchDiscriminator<double>::Trace t;
  d.forward(x, Phase::eval, &t);
  Gradients<double> grads(d.params());
  const auto gx = d.backward(t, r, &grads, true);
  auto loss = [&] { return dot(r, d.infer(x)); };
  EXPECT_LT(param_gradient_error(d.params(), grads, loss, 1e-6, 12, 3), 1e-4);
  EXPECT_LT(input_gradient_error(x, gx, loss, 1e-6, 40, 4), 1e-4);
}

TEST(SRGenerator, UpscalesByFour) {
  SRGeneratorSpec spec{2, 16, 4};
  SRGenerator<float> g(spec, 1);
  const auto y = g.forward(random_tensor<float>(2, 3, 32, 32, 1));
  EXPECT_EQ(y.h, 128);
  EXPECT_EQ(y.w, 128);
  EXPECT_EQ(y.c, 3);
  EXPECT_EQ(y.n, 2);
}

TEST(SRGenerator, ParameterCount) {
  for (const SRGeneratorSpec& spec : {SRGeneratorSpec{}, SRGeneratorSpec{2, 8, 4}}) {
    SRGenerator<float> g(spec, 1);
    EXPECT_EQ(g.params().trainable_count(), sr_generator_count(spec));
  }
  EXPECT_THROW((SRGenerator<float>(SRGeneratorSpec{2, 8, 2}, 0)), InvalidArgument);
}

TEST(SRGenerator, ZeroResidualWeightsGiveSmoothUpscaling) {
  SRGenerator<double> g(SRGeneratorSpec{2, 8, 4}, 1);
  g.params().zero_trainable();
  Image hr(128, 128, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) hr.at(c, y, x) = (x + y + 20.0 * c) / 300.0;
  const Image lr = bicubic_downscale(hr, 4.0);
  const Image out = image_at<double>(g.forward(to_tensor<double>(lr)), 0);
  for (double v : out.data) ASSERT_TRUE(std::isfinite(v));
  const Image bicubic_up = bicubic_resize(lr, ResampleSpec{0.25, ResampleKernel::keys_cubic, false});
  const double p_net = psnr(out, hr);
  const double p_bic = psnr(bicubic_up, hr);
  EXPECT_LT(std::abs(p_net - p_bic), 3.0) << p_net << " vs " << p_bic;
}

TEST(SRGenerator, GradientsMatchFiniteDifferences) {
  SRGenerator<double> g(SRGeneratorSpec{2, 8, 4}, 5);
  const auto x = random_tensor<double>(2, 3, 5, 6, 1);
  const auto r = random_tensor<double>(2, 3, 20, 24, 2, -1, 1);
  SRGenerator<double>::Trace t;
  g.forward(x, &t);
  Gradients<double> grads(g.params());
  g.backward(t, r, &grads);
  auto loss = [&] { return dot(r, g.forward(x)); };
  EXPECT_LT(param_gradient_error(g.params(), grads, loss, 1e-6, 12, 7), 1e-4);
}

TEST(Layers, PixelShuffleRoundTrip) {
  const auto x = random_tensor<float>(2, 8, 3, 5, 1);
  const auto y = pixel_shuffle(x, 2);
  EXPECT_EQ(y.c, 2);
  EXPECT_EQ(y.h, 6);
  EXPECT_EQ(y.w, 10);
  EXPECT_EQ(y.at(1, 1, 3, 4), x.at(1, 4 + 2 * 1 + 0, 1, 2));
  EXPECT_EQ(pixel_unshuffle(y, 2).data, x.data);
}

TEST(Layers, BilinearUpsamplePreservesConstants) {
  Tensor<double> x(1, 3, 5, 7, 0.25);
  for (double v : bilinear_upsample(x, 4).data) EXPECT_NEAR(v, 0.25, 1e-15);
}

}  // namespace
}  // namespace realsr

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "realsr/degrade.hpp"
#include "realsr/losses.hpp"
#include "realsr/models.hpp"
#include "support/test_helpers.hpp"

namespace realsr {
namespace {

using testing::input_gradient_error;
using testing::random_tensor;

constexpr double kLn2 = 0.69314718055994530942;

TEST(ColorLoss, ZeroForEqualInputs) {
  const auto a = random_tensor<double>(2, 3, 10, 10, 1);
  EXPECT_EQ(color_loss(a, a, make_moving_average(5)).value, 0.0);
}

TEST(ColorLoss, ConstantOffsetPassesThrough) {
  const auto a = random_tensor<double>(2, 3, 10, 10, 1);
  auto b = a;
  for (auto& v : b.data) v += 0.125;
  EXPECT_NEAR(color_loss(b, a, make_moving_average(5)).value, 0.125, 1e-12);
  EXPECT_NEAR(color_loss(b, a, make_moving_average(9)).value, 0.125, 1e-12);
}

TEST(ColorLoss, CenteredImpulse) {
  const int n = 11;
  Tensor<double> ref(1, 1, n, n, 0.3);
  auto fake = ref;
  const double d = 0.5;
  fake.at(0, 0, 5, 5) += d;
  EXPECT_NEAR(color_loss(fake, ref, make_moving_average(5)).value, d / (n * n), 1e-12);
}

TEST(ColorLoss, ShapeMismatchThrows) {
  EXPECT_THROW(color_loss(Tensor<double>(1, 3, 4, 4), Tensor<double>(1, 3, 4, 5), make_moving_average(5)), InvalidArgument);
}

TEST(ColorLoss, GradientMatchesFiniteDifferences) {
  for (int k : {1, 5, 9}) {
    const auto fb = make_moving_average(k);
    auto fake = random_tensor<double>(2, 3, 12, 13, 3);
    const auto ref = random_tensor<double>(2, 3, 12, 13, 4);
    const auto lg = color_loss(fake, ref, fb);
    EXPECT_LT(input_gradient_error(fake, lg.grad, [&] { return color_loss(fake, ref, fb).value; }, 1e-6, 60, 5), 1e-4);
  }
}

TEST(AdversarialLoss, GeneratorKnownValues) {
  EXPECT_NEAR(adversarial_gen_loss(Tensor<double>(2, 1, 4, 4, 0.0)).value, kLn2, 1e-12);
  EXPECT_NEAR(adversarial_gen_loss(Tensor<double>(2, 1, 4, 4, 20.0)).value, 0.0, 1e-8);
  Tensor<double> mixed(1, 1, 4, 4, 0.0);
  for (int i = 0; i < 8; ++i) mixed.data[i] = 20.0;
  EXPECT_NEAR(adversarial_gen_loss(mixed).value, 0.346574, 1e-6);
}

TEST(AdversarialLoss, DiscriminatorKnownValues) {
  EXPECT_NEAR(adversarial_disc_loss(Tensor<double>(1, 1, 3, 3, 20.0), Tensor<double>(1, 1, 3, 3, -20.0)).value, 0.0, 1e-8);
  EXPECT_NEAR(adversarial_disc_loss(Tensor<double>(1, 1, 3, 3, 0.0), Tensor<double>(1, 1, 3, 3, 0.0)).value, 2 * kLn2, 1e-12);
  // Saturated fooled term evaluated in the stable softplus form.
  EXPECT_NEAR(adversarial_disc_loss(Tensor<double>(1, 1, 3, 3, 0.0), Tensor<double>(1, 1, 3, 3, 20.0)).value,
              kLn2 + 20.0 + std::log1p(std::exp(-20.0)), 1e-12);
  const auto huge = adversarial_disc_loss(Tensor<double>(1, 1, 2, 2, -1000.0), Tensor<double>(1, 1, 2, 2, 1000.0));
  EXPECT_TRUE(std::isfinite(huge.value));
  EXPECT_NEAR(huge.value, 2000.0, 1e-9);
}

TEST(AdversarialLoss, GradientsMatchFiniteDifferences) {
  auto s = random_tensor<double>(2, 1, 5, 5, 1, -4, 4);
  const auto g = adversarial_gen_loss(s);
  EXPECT_LT(input_gradient_error(s, g.grad, [&] { return adversarial_gen_loss(s).value; }, 1e-5, 30, 1), 1e-6);
  auto r = random_tensor<double>(2, 1, 5, 5, 2, -4, 4);
  auto f = random_tensor<double>(2, 1, 5, 5, 3, -4, 4);
  const auto d = adversarial_disc_loss(r, f);
  EXPECT_LT(input_gradient_error(r, d.grad_real, [&] { return adversarial_disc_loss(r, f).value; }, 1e-5, 30, 2), 1e-6);
  EXPECT_LT(input_gradient_error(f, d.grad_fake, [&] { return adversarial_disc_loss(r, f).value; }, 1e-5, 30, 3), 1e-6);
}

TEST(Perceptual, PseudoMetricProperties) {
  PerceptualExtractor<double> ex;
  const auto a = random_tensor<double>(2, 3, 24, 24, 1);
  const auto b = random_tensor<double>(2, 3, 24, 24, 2);
  EXPECT_EQ(ex.distance(a, a), 0.0);
  EXPECT_EQ(ex.distance(a, b), ex.distance(b, a));
  EXPECT_GT(ex.distance(a, b), 0.0);
  EXPECT_THROW(ex.distance(a, Tensor<double>(2, 3, 24, 25)), InvalidArgument);
}

TEST(Perceptual, MonotoneInNoiseLevel) {
  PerceptualExtractor<double> ex;
  Image base(32, 32, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) base.at(c, y, x) = 0.5 + 0.3 * std::sin(0.2 * x + 0.1 * y + c);
  double prev = 0;
  for (double sigma : {2.0, 4.0, 8.0, 16.0}) {
    const double d = ex.distance(to_tensor<double>(add_sensor_noise(base, sigma, 7)), to_tensor<double>(base));
    EXPECT_GT(d, prev) << sigma;
    prev = d;
  }
}

TEST(Perceptual, GradientMatchesFiniteDifferences) {
  PerceptualExtractor<double> ex;
  auto a = random_tensor<double>(2, 3, 12, 12, 3);
  const auto b = random_tensor<double>(2, 3, 12, 12, 4);
  const auto lg = ex.distance_and_grad(a, b);
  EXPECT_LT(input_gradient_error(a, lg.grad, [&] { return ex.distance(a, b); }, 1e-4, 60, 1), 1e-4);
}

TEST(Perceptual, ExternalWeightsAreSwappable) {
  PerceptualExtractor<double> ex;
  PerceptualExtractor<double> other(PerceptualConfig{PerceptualMode::fixed_random_pyramid, 99, {16, 32, 32}, {1, 1, 1}});
  const auto a = random_tensor<double>(1, 3, 16, 16, 3);
  const auto b = random_tensor<double>(1, 3, 16, 16, 4);
  ex.set_weights(other.params());
  EXPECT_EQ(ex.config().mode, PerceptualMode::external_pretrained);
  EXPECT_EQ(ex.distance(a, b), other.distance(a, b));
  PerceptualExtractor<double> small(PerceptualConfig{PerceptualMode::fixed_random_pyramid, 1, {4}, {1}});
  EXPECT_THROW(ex.set_weights(small.params()), DataError);
}

TEST(GeneratorLosses, DsganWeighting) {
  PerceptualExtractor<double> ex;
  const auto fb = make_moving_average(5);
  const auto x = random_tensor<double>(2, 3, 16, 16, 1);
  const Tensor<double> zeros(2, 1, 16, 16, 0.0);
  EXPECT_EQ(dsgan_generator_loss(x, x, zeros, LossWeights{1, 0, 0}, fb, ex).total, 0.0);
  EXPECT_NEAR(combine_losses(LossWeights::dsgan(), 0.1, 0.693, 2.0), 0.123465, 1e-12);
  const auto y = random_tensor<double>(2, 3, 16, 16, 2);
  const auto l = dsgan_generator_loss(y, x, zeros, LossWeights::dsgan(), fb, ex);
  EXPECT_NEAR(l.total, l.color + 0.005 * l.texture + 0.01 * l.perceptual, 1e-12);
  EXPECT_NEAR(l.texture, kLn2, 1e-12);
}

TEST(GeneratorLosses, SrWeighting) {
  PerceptualExtractor<double> ex;
  const auto fb = make_moving_average(9);
  const auto hr = random_tensor<double>(1, 3, 20, 20, 1);
  const Tensor<double> zeros(1, 1, 20, 20, 0.0);
  const auto same = sr_generator_loss(hr, hr, zeros, LossWeights::sr(), fb, ex);
  EXPECT_NEAR(same.total, 0.003466, 1e-6);
  auto shifted = hr;
  for (auto& v : shifted.data) v += 0.05;
  EXPECT_NEAR(sr_generator_loss(shifted, hr, zeros, LossWeights{1, 0, 0}, fb, ex).total, 0.05, 1e-12);
  const auto l = sr_generator_loss(shifted, hr, zeros, LossWeights::sr(), fb, ex);
  EXPECT_NEAR(l.total, l.perceptual + 0.005 * l.texture + 0.01 * l.color, 1e-12);
}

TEST(GeneratorLosses, RejectNegativeWeights) {
  PerceptualExtractor<double> ex;
  const auto x = random_tensor<double>(1, 3, 8, 8, 1);
  EXPECT_THROW(dsgan_generator_loss(x, x, Tensor<double>(), LossWeights{-1, 0, 0}, make_moving_average(5), ex), InvalidArgument);
}

// The discriminator branch seen by the generator: scores = D(highpass(x)).
TEST(GeneratorLosses, TextureGradientThroughDiscriminatorAndHighpass) {
  const auto fb = make_moving_average(5);
  PatchDiscriminator<double> d(DiscriminatorSpec{4, 5, {3, 4, 5, 1}, {1, 1, 1, 1}, 0.2}, 4);
  auto x = random_tensor<double>(2, 3, 18, 18, 5);
  auto loss = [&] { return adversarial_gen_loss(d.forward(highpass(x, fb), Phase::train)).value; };
  PatchDiscriminator<double>::Trace t;
  const auto scores = d.forward(highpass(x, fb), Phase::train, &t);
  const auto gs = adversarial_gen_loss(scores);
  const auto gx = highpass_adjoint(d.backward(t, gs.grad, nullptr, true), fb);
  EXPECT_LT(input_gradient_error(x, gx, loss, 1e-6, 40, 6), 1e-4);
}

}  // namespace
}  // namespace realsr

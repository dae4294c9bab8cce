#include <gtest/gtest.h>

#include <cmath>

#include "realsr/resample.hpp"
#include "support/oracles.hpp"
#include "support/test_helpers.hpp"

namespace realsr {
namespace {

using testing::constant_image;
using testing::random_image;

using testing::oracle_resize;

TEST(CubicKernel, KnownValues) {
  EXPECT_DOUBLE_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(0.5), 0.5625);
  EXPECT_DOUBLE_EQ(cubic_kernel(-0.5), 0.5625);
  EXPECT_DOUBLE_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.5), -0.0625);
}

TEST(BicubicResize, FactorOneIsIdentity) {
  const auto img = random_image(9, 13, 3, 1);
  EXPECT_LT(max_abs_diff(bicubic_resize(img, {1.0}), img), 1e-12);
}

TEST(BicubicResize, ConstantStaysConstant) {
  const auto out = bicubic_resize(constant_image(32, 24, 3, 0.3), {4.0});
  EXPECT_EQ(out.height, 8);
  EXPECT_EQ(out.width, 6);
  for (double v : out.data) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(BicubicResize, RampMatchesScalarOracle) {
  Image ramp(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) ramp.at(0, y, x) = (x + 2.0 * y) / 48.0;
  const auto out = bicubic_resize(ramp, {4.0});
  const auto ref = oracle_resize(ramp, 4.0);
  EXPECT_LT(max_abs_diff(out, ref), 1e-9);
}

TEST(BicubicResize, RandomImagesMatchScalarOracle) {
  for (double f : {2.0, 4.0, 0.5}) {
    const auto img = random_image(24, 20, 3, static_cast<std::uint64_t>(f * 10));
    EXPECT_LT(max_abs_diff(bicubic_resize(img, {f}), oracle_resize(img, f)), 1e-9) << f;
  }
}

TEST(BicubicResize, DegenerateOutputRejected) {
  EXPECT_THROW(bicubic_resize(random_image(3, 3, 1, 0), {4.0}), InvalidArgument);
  EXPECT_THROW(bicubic_resize(random_image(8, 8, 1, 0), {0.0}), InvalidArgument);
}

TEST(ResampleProperties, PartitionOfUnity) {
  for (double f : {2.0, 3.0, 4.0, 0.25}) {
    const int in_len = 37;
    const auto table = contributions(in_len, resized_length(in_len, f), f, true);
    for (const auto& c : table) {
      double s = 0;
      for (double w : c.weight) s += w;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(ResampleProperties, SeparableOrderDoesNotMatter) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = random_image(32, 28, 3, s);
    const auto a = bicubic_resize_unclamped(img, {4.0}, true);
    const auto b = bicubic_resize_unclamped(img, {4.0}, false);
    EXPECT_LT(max_abs_diff(a, b), 1e-9);
  }
}

TEST(ResampleProperties, CheckerboardIsAveragedOut) {
  Image cb(64, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) cb.at(0, y, x) = (x + y) % 2 ? 1.0 : 0.0;
  const auto out = bicubic_resize(cb, {4.0});
  EXPECT_LT(stddev(out), 0.01);
}

TEST(ResampleProperties, FlipCovariant) {
  const auto img = random_image(32, 32, 3, 5);
  for (Flip f : {Flip::horizontal, Flip::vertical}) {
    const auto a = bicubic_resize(flip(img, f), {4.0});
    const auto b = flip(bicubic_resize(img, {4.0}), f);
    EXPECT_LT(max_abs_diff(a, b), 1e-9);
  }
}

}  // namespace
}  // namespace realsr

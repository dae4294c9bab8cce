#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "realsr/kernels.hpp"
#include "support/test_helpers.hpp"

namespace realsr {
namespace {

using testing::constant_image;
using testing::random_image;

TEST(MovingAverage, WeightsAreUniform) {
  const auto k1 = make_moving_average(1);
  ASSERT_EQ(k1.lowpass_weights.size(), 1u);
  EXPECT_DOUBLE_EQ(k1.lowpass_weights[0], 1.0);

  const auto k5 = make_moving_average(5);
  ASSERT_EQ(k5.lowpass_weights.size(), 25u);
  for (double w : k5.lowpass_weights) EXPECT_DOUBLE_EQ(w, 0.04);

  const auto k9 = make_moving_average(9);
  ASSERT_EQ(k9.lowpass_weights.size(), 81u);
  double sum = 0;
  for (double w : k9.lowpass_weights) {
    EXPECT_NEAR(w, 0.012345679, 1e-9);
    sum += w;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(MovingAverage, RejectsEvenOrNonPositive) {
  EXPECT_THROW(make_moving_average(0), InvalidArgument);
  EXPECT_THROW(make_moving_average(4), InvalidArgument);
  EXPECT_THROW(make_moving_average(-3), InvalidArgument);
}

TEST(Lowpass, PreservesConstant) {
  const auto img = constant_image(12, 10, 3, 0.5);
  const auto low = lowpass(img, make_moving_average(5));
  for (double v : low.data) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(Lowpass, CenteredImpulse) {
  Image img(9, 9, 1, 0.0);
  img.at(0, 4, 4) = 1.0;
  const auto low = lowpass(img, make_moving_average(5));
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const bool inside = std::abs(y - 4) <= 2 && std::abs(x - 4) <= 2;
      EXPECT_NEAR(low.at(0, y, x), inside ? 1.0 / 25.0 : 0.0, 1e-12) << y << "," << x;
    }
}

TEST(Lowpass, SizeOneIsIdentity) {
  const auto img = random_image(7, 11, 3, 3);
  EXPECT_EQ(max_abs_diff(lowpass(img, make_moving_average(1)), img), 0.0);
}

TEST(Lowpass, TinyImagesUseReflection) {
  const auto img = random_image(1, 1, 3, 4);
  const auto low = lowpass(img, make_moving_average(5));
  EXPECT_LT(max_abs_diff(low, img), 1e-12);
  const auto img2 = random_image(2, 3, 1, 5);
  EXPECT_NO_THROW(lowpass(img2, make_moving_average(9)));
}

TEST(Highpass, CenteredImpulse) {
  Image img(9, 9, 1, 0.0);
  img.at(0, 4, 4) = 1.0;
  const auto high = highpass(img, make_moving_average(5));
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      double expect = 0.0;
      if (y == 4 && x == 4)
        expect = 24.0 / 25.0;
      else if (std::abs(y - 4) <= 2 && std::abs(x - 4) <= 2)
        expect = -1.0 / 25.0;
      EXPECT_NEAR(high.at(0, y, x), expect, 1e-12);
    }
}

TEST(Highpass, ConstantAndIdentityCases) {
  const auto c = constant_image(8, 8, 3, 0.37);
  for (double v : highpass(c, make_moving_average(5)).data) EXPECT_LT(std::abs(v), 1e-9);
  const auto r = random_image(8, 8, 3, 1);
  for (double v : highpass(r, make_moving_average(1)).data) EXPECT_EQ(v, 0.0);
}

TEST(Decompose, ReconstructsAndSplitsNoise) {
  const auto fb = make_moving_average(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto img = random_image(16, 20, 3, seed);
    const auto pair = decompose(img, fb);
    EXPECT_LT(max_abs_diff(pair.low + pair.high, img), 1e-6);
  }
  const auto c = constant_image(6, 6, 1, 0.2);
  const auto pc = decompose(c, fb);
  EXPECT_LT(max_abs_diff(pc.low, c), 1e-12);
  for (double v : pc.high.data) EXPECT_LT(std::abs(v), 1e-12);

  const auto noise = random_image(64, 64, 1, 99);
  const auto pn = decompose(noise, fb);
  EXPECT_LT(stddev(pn.high), stddev(noise));
  EXPECT_LT(stddev(pn.low), stddev(noise));
}

TEST(Lowpass, SeparableMatchesDense) {
  for (int k : {3, 5, 9}) {
    const auto fb = make_moving_average(k);
    const auto img = random_image(13, 17, 1, static_cast<std::uint64_t>(k));
    Image dense(13, 17, 1);
    lowpass_plane_dense<double>(img.plane(0), dense.plane(0), 13, 17, fb);
    EXPECT_LT(max_abs_diff(lowpass(img, fb), dense), 1e-9) << k;
  }
}

TEST(Lowpass, NonUniformKernel) {
  std::vector<double> w{0, 0.125, 0, 0.125, 0.5, 0.125, 0, 0.125, 0};
  const auto fb = make_filter_bank(3, w);
  const auto c = constant_image(5, 5, 1, 0.8);
  for (double v : lowpass(c, fb).data) EXPECT_NEAR(v, 0.8, 1e-12);
  EXPECT_THROW(make_filter_bank(3, std::vector<double>(9, 0.2)), InvalidArgument);
}

TEST(Lowpass, AdjointIdentity) {
  // <L u, v> == <u, L^T v> for uniform and dense kernels.
  std::vector<double> w{0.05, 0.1, 0.05, 0.1, 0.4, 0.1, 0.05, 0.1, 0.05};
  for (const auto& fb : {make_moving_average(5), make_moving_average(9), make_filter_bank(3, w)}) {
    const auto u = random_image(11, 14, 1, 7);
    const auto v = random_image(11, 14, 1, 8);
    Image lu(11, 14, 1), ltv(11, 14, 1);
    lowpass_plane<double>(u.plane(0), lu.plane(0), 11, 14, fb);
    lowpass_plane_adjoint<double>(v.plane(0), ltv.plane(0), 11, 14, fb);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      a += lu.data[i] * v.data[i];
      b += u.data[i] * ltv.data[i];
    }
    EXPECT_NEAR(a, b, 1e-10);
  }
}

// Properties over seeded random inputs.

TEST(KernelProperties, Linearity) {
  const auto fb = make_moving_average(5);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_image(15, 12, 3, 2 * s);
    const auto v = random_image(15, 12, 3, 2 * s + 1);
    const double a = 0.3 + 0.1 * static_cast<double>(s), b = -1.7;
    const auto lhs = lowpass(a * u + b * v, fb);
    const auto rhs = a * lowpass(u, fb) + b * lowpass(v, fb);
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-6);
  }
}

TEST(KernelProperties, LowpassDoesNotAddHighFrequencyEnergy) {
  for (int k : {3, 5, 9}) {
    const auto fb = make_moving_average(k);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto img = random_image(32, 32, 3, 100 + s);
      EXPECT_LE(stddev(highpass(lowpass(img, fb), fb)), stddev(highpass(img, fb)));
    }
  }
}

TEST(KernelProperties, ShiftCovarianceInInterior) {
  const int k = 5, n = 40;
  const auto fb = make_moving_average(k);
  const auto img = random_image(n, n, 1, 77);
  Image shifted(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) shifted.at(0, y, x) = img.at(0, y, std::max(0, x - 1));
  const auto a = decompose(img, fb);
  const auto b = decompose(shifted, fb);
  for (int y = k; y < n - k; ++y)
    for (int x = k + 1; x < n - k; ++x) {
      EXPECT_NEAR(b.low.at(0, y, x), a.low.at(0, y, x - 1), 1e-12);
      EXPECT_NEAR(b.high.at(0, y, x), a.high.at(0, y, x - 1), 1e-12);
    }
}

TEST(KernelProperties, PeriodicZeroSumPatternIsAnnihilated) {
  // cos(2*pi*i/k) sums to zero over any k consecutive samples and is
  // reflection-symmetric when n = k*m + 1, so the low band vanishes exactly.
  for (int k : {5, 9}) {
    const int n = 4 * k + 1;
    Image p(n, n, 1);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) p.at(0, y, x) = std::cos(2 * std::numbers::pi * y / k) * (1.0 + 0.01 * x);
    for (double v : lowpass(p, make_moving_average(k)).data) EXPECT_LT(std::abs(v), 1e-12);
  }
}

}  // namespace
}  // namespace realsr

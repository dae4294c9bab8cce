#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "realsr/degrade.hpp"
#include "realsr/image_io.hpp"
#include "realsr/metrics.hpp"
#include "support/oracles.hpp"
#include "support/test_helpers.hpp"

namespace realsr {
namespace {

using testing::constant_image;
using testing::random_image;

using testing::oracle_psnr;
using testing::oracle_ssim;

TEST(Psnr, KnownValues) {
  const auto a = random_image(8, 8, 3, 1);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  const auto b = constant_image(8, 8, 3, 0.5);
  const auto c = constant_image(8, 8, 3, 0.6);
  EXPECT_NEAR(psnr(b, c), 20.0, 1e-9);
  EXPECT_THROW(psnr(a, random_image(8, 9, 3, 1)), InvalidArgument);
}

TEST(Psnr, MatchesOracleAndIsSymmetric) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = random_image(12, 12, 3, 2 * s), b = random_image(12, 12, 3, 2 * s + 1);
    EXPECT_NEAR(psnr(a, b), oracle_psnr(a, b), 1e-9);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
  }
}

TEST(Psnr, ShiftInvariant) {
  auto a = random_image(10, 10, 3, 3), b = random_image(10, 10, 3, 4);
  const double before = psnr(a, b);
  for (auto& v : a.data) v += 0.25;
  for (auto& v : b.data) v += 0.25;
  EXPECT_NEAR(psnr(a, b), before, 1e-9);
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const auto a = random_image(20, 20, 3, 1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const double c1 = 1e-4;
  const double expect = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  EXPECT_NEAR(ssim(constant_image(16, 16, 3, 0.5), constant_image(16, 16, 3, 0.6)), expect, 1e-12);
  EXPECT_NEAR(oracle_ssim(constant_image(16, 16, 3, 0.5), constant_image(16, 16, 3, 0.6)), expect, 1e-12);
}

TEST(Ssim, MatchesOracleAndIsSymmetric) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = random_image(16, 14, 3, 1000 + 2 * s), b = random_image(16, 14, 3, 1001 + 2 * s);
    EXPECT_NEAR(ssim(a, b), oracle_ssim(a, b), 1e-6);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
}

TEST(Ssim, DecreasesWithNoise) {
  Image base(48, 48, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) base.at(c, y, x) = 0.5 + 0.3 * std::sin(0.3 * x + 0.2 * y + c);
  double prev = 1.0;
  for (double sigma : {2.0, 4.0, 8.0, 16.0}) {
    const double v = ssim(add_sensor_noise(base, sigma, 3), base);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Ssim, RejectsTinyImages) { EXPECT_THROW(ssim(random_image(10, 20, 1, 0), random_image(10, 20, 1, 1)), InvalidArgument); }

TEST(HfStd, ConstantIsZeroAndMarginChecked) {
  const auto fb = make_moving_average(5);
  EXPECT_NEAR(hf_std_statistic(constant_image(32, 32, 3, 0.4), fb, 4), 0.0, 1e-12);
  EXPECT_THROW(hf_std_statistic(constant_image(32, 32, 3, 0.4), fb, 1), InvalidArgument);
  EXPECT_THROW(hf_std_statistic(constant_image(32, 32, 3, 0.4), fb, 16), InvalidArgument);
}

TEST(HfStd, NoiseLevelAndDownscaleAttenuation) {
  const auto fb = make_moving_average(5);
  const auto noisy = add_sensor_noise(constant_image(512, 512, 3, 0.5), 8.0, 17);
  const double stat = hf_std_statistic(noisy, fb, 8);
  EXPECT_NEAR(stat / (8.0 / 255.0 * std::sqrt(24.0 / 25.0)), 1.0, 0.05);
  const double down = hf_std_statistic(bicubic_downscale(noisy, 4.0), fb, 8);
  EXPECT_LT(down, 0.4 * stat);
}

class EvaluateDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root = std::filesystem::temp_directory_path() / ("realsr_eval_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root / "a");
    std::filesystem::create_directories(root / "b");
  }
  void TearDown() override { std::filesystem::remove_all(root); }
  std::filesystem::path root;
};

TEST_F(EvaluateDir, IdenticalDirectories) {
  for (int i = 0; i < 2; ++i) {
    const auto img = random_image(32, 32, 3, static_cast<std::uint64_t>(i));
    write_png(root / "a" / ("img" + std::to_string(i) + ".png"), img);
    write_png(root / "b" / ("img" + std::to_string(i) + ".png"), img);
  }
  PerceptualExtractor<double> ex;
  const auto r = evaluate(root / "a", root / "b", ex);
  ASSERT_EQ(r.images.size(), 2u);
  for (const auto& m : r.images) {
    EXPECT_TRUE(std::isinf(m.psnr));
    EXPECT_NEAR(m.ssim, 1.0, 1e-12);
    EXPECT_EQ(m.perceptual, 0.0);
  }
  EXPECT_TRUE(std::isinf(r.mean.psnr));
  EXPECT_NE(render_table(r).find("inf"), std::string::npos);
}

TEST_F(EvaluateDir, MeansAndRoundTrip) {
  for (int i = 0; i < 2; ++i) {
    const auto img = random_image(32, 32, 3, static_cast<std::uint64_t>(i));
    write_png(root / "a" / ("img" + std::to_string(i) + ".png"), img);
    write_png(root / "b" / ("img" + std::to_string(i) + ".png"), add_sensor_noise(img, 4.0 * (i + 1), 3));
  }
  PerceptualExtractor<double> ex;
  const auto r = evaluate(root / "a", root / "b", ex, EvaluateOptions{"sdsr", 5, 8, 2, {}});
  ASSERT_EQ(r.images.size(), 2u);
  EXPECT_NEAR(r.mean.psnr, 0.5 * (r.images[0].psnr + r.images[1].psnr), 1e-12);
  EXPECT_NEAR(r.mean.ssim, 0.5 * (r.images[0].ssim + r.images[1].ssim), 1e-12);
  EXPECT_NEAR(r.mean.perceptual, 0.5 * (r.images[0].perceptual + r.images[1].perceptual), 1e-12);
  const auto text = serialize_report(r);
  EXPECT_EQ(serialize_report(parse_report(text)), text);
  // job count does not change results
  EXPECT_EQ(serialize_report(evaluate(root / "a", root / "b", ex, EvaluateOptions{"sdsr", 5, 8, 1, {}})), text);
}

TEST_F(EvaluateDir, MismatchedFileSets) {
  write_png(root / "a" / "x.png", random_image(16, 16, 3, 0));
  write_png(root / "b" / "y.png", random_image(16, 16, 3, 0));
  PerceptualExtractor<double> ex;
  EXPECT_THROW(evaluate(root / "a", root / "b", ex), DataError);
}

TEST(ImageIo, Png16RoundTripIsExactAfterQuantization) {
  const auto path = std::filesystem::temp_directory_path() / "realsr_io16.png";
  const auto img = quantize(random_image(9, 7, 3, 3), 16);
  write_png(path, img, 16);
  EXPECT_LT(max_abs_diff(read_png(path), img), 1e-12);
  write_png(path, img, 8);
  EXPECT_LT(max_abs_diff(read_png(path), img), 0.5 / 255.0 + 1e-12);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace realsr

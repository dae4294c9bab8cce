#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "realsr/error.hpp"
#include "realsr/image.hpp"
#include "realsr/image_io.hpp"
#include "realsr/jpeg_codec.hpp"
#include "realsr/resample.hpp"
#include "realsr/rng.hpp"

namespace realsr {

enum class DegradationKind { none, gaussian_noise, jpeg };

inline std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::none: return "none";
    case DegradationKind::gaussian_noise: return "gaussian_noise";
    case DegradationKind::jpeg: return "jpeg";
  }
  return "none";
}

inline DegradationKind parse_degradation_kind(const std::string& s) {
  if (s == "none") return DegradationKind::none;
  if (s == "gaussian_noise" || s == "noise") return DegradationKind::gaussian_noise;
  if (s == "jpeg") return DegradationKind::jpeg;
  throw InvalidArgument("unknown degradation kind: " + s);
}

struct DegradationSpec {
  DegradationKind kind = DegradationKind::none;
  double sigma = 0.0;  // 8-bit pixel units
  int quality = 90;
  std::uint64_t seed = 0;

  std::string describe() const {
    switch (kind) {
      case DegradationKind::gaussian_noise: return "gaussian_noise;sigma=" + std::to_string(sigma) + ";seed=" + std::to_string(seed);
      case DegradationKind::jpeg: return JpegSettings::describe(quality);
      case DegradationKind::none: break;
    }
    return "none";
  }
};

/// img + N(0, (sigma/255)^2) per sample, clamped to [0,1].
inline Image add_sensor_noise(const Image& img, double sigma, std::uint64_t seed) {
  validate(img);
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  Image out = img;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  const double s = sigma / 255.0;
  for (auto& v : out.data) v = std::clamp(v + s * rng.normal(), 0.0, 1.0);
  return out;
}

/// Encode/decode round trip through the pinned JPEG configuration.
inline Image jpeg_degrade(const Image& img, int quality) {
  validate(img);
  if (img.channels != 3) throw InvalidArgument("JPEG degradation requires a 3-channel image");
  if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must be in [1, 100]");
  return from_rgb8(jpeg_decode(jpeg_encode(to_rgb8(img), quality)));
}

inline Image apply_degradation(const Image& img, const DegradationSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DegradationKind::none: return img;
    case DegradationKind::gaussian_noise: return add_sensor_noise(img, spec.sigma, seed);
    case DegradationKind::jpeg: return jpeg_degrade(img, spec.quality);
  }
  return img;
}

struct ImagePair {
  Image hr;
  Image lr;
};

/// Same degradation process at both scales; HR uses spec.seed, LR spec.seed + 1.
inline ImagePair make_gt_pair(const Image& clean_hr, const DegradationSpec& spec, double factor) {
  ImagePair p;
  p.hr = apply_degradation(clean_hr, spec, spec.seed);
  p.lr = apply_degradation(bicubic_downscale(clean_hr, factor), spec, spec.seed + 1);
  return p;
}

}  // namespace realsr

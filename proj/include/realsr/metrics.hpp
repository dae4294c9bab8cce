#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "realsr/error.hpp"
#include "realsr/image.hpp"
#include "realsr/image_io.hpp"
#include "realsr/kernels.hpp"
#include "realsr/losses.hpp"
#include "realsr/parallel.hpp"
#include "realsr/tensor.hpp"

namespace realsr {

/// 10 log10(1 / MSE) for [0,1] data; +inf for identical inputs.
inline double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const int r = size / 2;
  double s = 0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

/// Mean SSIM over all window positions fully inside the image, averaged over channels.
inline double ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim");
  if (a.height < p.window || a.width < p.window)
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
  const auto g = gaussian_window(p.window, p.sigma);
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  const int oh = a.height - p.window + 1, ow = a.width - p.window + 1;
  const int W = a.width;
  double total = 0;
  // Horizontal valid pass of five moments, then vertical.
  std::vector<double> h(static_cast<std::size_t>(a.height) * ow * 5);
  for (int c = 0; c < a.channels; ++c) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < ow; ++x) {
        double m[5] = {0, 0, 0, 0, 0};
        for (int t = 0; t < p.window; ++t) {
          const double va = pa[static_cast<std::size_t>(y) * W + x + t];
          const double vb = pb[static_cast<std::size_t>(y) * W + x + t];
          m[0] += g[t] * va;
          m[1] += g[t] * vb;
          m[2] += g[t] * va * va;
          m[3] += g[t] * vb * vb;
          m[4] += g[t] * va * vb;
        }
        for (int q = 0; q < 5; ++q) h[(static_cast<std::size_t>(y) * ow + x) * 5 + q] = m[q];
      }
    double acc = 0;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double m[5] = {0, 0, 0, 0, 0};
        for (int t = 0; t < p.window; ++t)
          for (int q = 0; q < 5; ++q) m[q] += g[t] * h[(static_cast<std::size_t>(y + t) * ow + x) * 5 + q];
        const double va = m[2] - m[0] * m[0];
        const double vb = m[3] - m[1] * m[1];
        const double cov = m[4] - m[0] * m[1];
        acc += ((2 * m[0] * m[1] + c1) * (2 * cov + c2)) / ((m[0] * m[0] + m[1] * m[1] + c1) * (va + vb + c2));
      }
    total += acc / (static_cast<double>(oh) * ow);
  }
  return total / a.channels;
}

/// Standard deviation of the high band over the margin-cropped interior, all channels pooled.
inline double hf_std_statistic(const Image& img, const FilterBank& fb, int margin) {
  validate(img);
  if (margin < fb.radius()) throw InvalidArgument("hf statistic: margin must be >= the kernel radius");
  if (2 * margin >= img.height || 2 * margin >= img.width) throw InvalidArgument("hf statistic: margin too large for image");
  const auto high = highpass(img, fb);
  std::vector<double> v;
  v.reserve(img.size());
  for (int c = 0; c < img.channels; ++c)
    for (int y = margin; y < img.height - margin; ++y)
      for (int x = margin; x < img.width - margin; ++x) v.push_back(high.at(c, y, x));
  return stddev(std::span<const double>(v));
}

/// Mean of an hf statistic over a set of images.
inline double mean_hf_std(const std::vector<Image>& imgs, const FilterBank& fb, int margin) {
  require(!imgs.empty(), "mean_hf_std: no images");
  double s = 0;
  for (const auto& im : imgs) s += hf_std_statistic(im, fb, margin);
  return s / static_cast<double>(imgs.size());
}

/// Shared with the perceptual loss: same extractor, same definition.
inline double perceptual_metric(const Image& a, const Image& b, const PerceptualExtractor<double>& ex) {
  require_same_shape(a, b, "perceptual metric");
  return ex.distance(to_tensor<double>(a), to_tensor<double>(b));
}

struct ImageMetrics {
  std::string name;
  double psnr = 0;
  double ssim = 0;
  double perceptual = 0;
  double hf_std = 0;
};

struct MetricReport {
  int version = 1;
  std::string mode;  // sdsr | tdsr | plain
  std::vector<ImageMetrics> images;
  ImageMetrics mean;
  std::map<std::string, std::string> metadata;

  void compute_means() {
    mean = ImageMetrics{"mean", 0, 0, 0, 0};
    if (images.empty()) return;
    for (const auto& m : images) {
      mean.psnr += m.psnr;
      mean.ssim += m.ssim;
      mean.perceptual += m.perceptual;
      mean.hf_std += m.hf_std;
    }
    const double n = static_cast<double>(images.size());
    mean.psnr /= n;
    mean.ssim /= n;
    mean.perceptual /= n;
    mean.hf_std /= n;
  }
};

namespace detail {

inline nlohmann::ordered_json number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double number_from_json(const nlohmann::ordered_json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

inline nlohmann::ordered_json metrics_json(const ImageMetrics& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["psnr"] = number_json(m.psnr);
  j["ssim"] = number_json(m.ssim);
  j["perceptual"] = number_json(m.perceptual);
  j["hf_std"] = number_json(m.hf_std);
  return j;
}

inline ImageMetrics metrics_from_json(const nlohmann::ordered_json& j) {
  return {j.at("name").get<std::string>(), number_from_json(j.at("psnr")), number_from_json(j.at("ssim")),
          number_from_json(j.at("perceptual")), number_from_json(j.at("hf_std"))};
}

}  // namespace detail

inline std::string serialize_report(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "realsr-metric-report";
  j["version"] = r.version;
  j["mode"] = r.mode;
  j["metadata"] = r.metadata;
  j["mean"] = detail::metrics_json(r.mean);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : r.images) arr.push_back(detail::metrics_json(m));
  j["images"] = arr;
  return j.dump(2) + "\n";
}

inline MetricReport parse_report(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("metric report: ") + e.what());
  }
  if (j.value("format", "") != "realsr-metric-report") throw DataError("not a metric report");
  MetricReport r;
  r.version = j.at("version").get<int>();
  if (r.version != 1) throw DataError("unsupported metric report version " + std::to_string(r.version));
  r.mode = j.at("mode").get<std::string>();
  r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  r.mean = detail::metrics_from_json(j.at("mean"));
  for (const auto& e : j.at("images")) r.images.push_back(detail::metrics_from_json(e));
  return r;
}

/// Fixed-width table with the PSNR / SSIM / perceptual columns.
inline std::string render_table(const MetricReport& r) {
  std::ostringstream os;
  auto fmt = [](double v, int prec) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
  };
  os << "image                  PSNR(dB)^   SSIM^   perceptual_v   hf_std\n";
  auto row = [&](const ImageMetrics& m) {
    std::string name = m.name;
    name.resize(20, ' ');
    os << name << "   " << fmt(m.psnr, 2) << "   " << fmt(m.ssim, 4) << "   " << fmt(m.perceptual, 4) << "   "
       << fmt(m.hf_std, 5) << "\n";
  };
  for (const auto& m : r.images) row(m);
  row(r.mean);
  return os.str();
}

struct EvaluateOptions {
  std::string mode = "sdsr";
  int hf_kernel = 5;
  int hf_margin = 8;
  int jobs = 1;
  SsimParams ssim;
};

inline ImageMetrics compare_images(const std::string& name, const Image& sr, const Image& gt,
                                   const PerceptualExtractor<double>& ex, const EvaluateOptions& opt) {
  if (!sr.same_shape(gt)) throw DataError("shape mismatch for " + name);
  ImageMetrics m;
  m.name = name;
  m.psnr = psnr(sr, gt);
  m.ssim = ssim(sr, gt, opt.ssim);
  m.perceptual = perceptual_metric(sr, gt, ex);
  m.hf_std = hf_std_statistic(sr, make_moving_average(opt.hf_kernel), opt.hf_margin);
  return m;
}

/// Compares every image of sr_dir against the same-named file in gt_dir.
/// In SDSR mode gt_dir holds corrupted HR images, in TDSR mode clean ones.
inline MetricReport evaluate(const std::filesystem::path& sr_dir, const std::filesystem::path& gt_dir,
                             const PerceptualExtractor<double>& ex, const EvaluateOptions& opt = {}) {
  const auto sr_files = list_images(sr_dir);
  const auto gt_files = list_images(gt_dir);
  if (sr_files.empty()) throw DataError("no images in " + sr_dir.string());
  std::vector<std::string> sr_names, gt_names;
  for (const auto& p : sr_files) sr_names.push_back(p.filename().string());
  for (const auto& p : gt_files) gt_names.push_back(p.filename().string());
  if (sr_names != gt_names) throw DataError("file sets differ between " + sr_dir.string() + " and " + gt_dir.string());
  MetricReport r;
  r.mode = opt.mode;
  r.images.resize(sr_files.size());
  parallel_for(sr_files.size(), opt.jobs, [&](std::size_t i) {
    r.images[i] = compare_images(sr_names[i], read_image(sr_files[i]), read_image(gt_files[i]), ex, opt);
  });
  r.compute_means();
  r.metadata["ssim"] = "gaussian;window=" + std::to_string(opt.ssim.window) + ";sigma=1.5;k1=0.01;k2=0.03;L=1";
  r.metadata["perceptual"] = ex.config().mode == PerceptualMode::fixed_random_pyramid
                                 ? "fixed_random_pyramid;seed=" + std::to_string(ex.config().seed)
                                 : "external_pretrained";
  r.metadata["hf_std"] = "moving_average;k=" + std::to_string(opt.hf_kernel) + ";margin=" + std::to_string(opt.hf_margin);
  return r;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace realsr

#pragma once

// Desk-scale ablations: train DSGAN and SR variants on a synthetic corpus with
// a known corruption, evaluate on held-out images, report medians over seeds.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "realsr/checkpoint.hpp"
#include "realsr/config.hpp"
#include "realsr/datasets.hpp"
#include "realsr/degrade.hpp"
#include "realsr/error.hpp"
#include "realsr/image_io.hpp"
#include "realsr/kernels.hpp"
#include "realsr/metrics.hpp"
#include "realsr/toy.hpp"
#include "realsr/training.hpp"

namespace realsr {

enum class Corruption { noise8, jpeg30 };
enum class Setting { sdsr, tdsr };
enum class DatasetVariant { bicubic, dsgan, gt };

inline std::string to_string(Corruption c) { return c == Corruption::noise8 ? "noise8" : "jpeg30"; }
inline std::string to_string(Setting s) { return s == Setting::sdsr ? "sdsr" : "tdsr"; }
inline std::string to_string(DatasetVariant d) {
  switch (d) {
    case DatasetVariant::bicubic: return "bicubic";
    case DatasetVariant::dsgan: return "dsgan";
    case DatasetVariant::gt: return "gt";
  }
  return "?";
}
inline std::string to_string(SrMethod m) { return m == SrMethod::frequency_separated ? "frequency_separated" : "plain"; }

inline Corruption parse_corruption(const std::string& s) {
  if (s == "noise8") return Corruption::noise8;
  if (s == "jpeg30") return Corruption::jpeg30;
  throw InvalidArgument("unknown corruption '" + s + "' (expected noise8 or jpeg30)");
}
inline Setting parse_setting(const std::string& s) {
  if (s == "sdsr") return Setting::sdsr;
  if (s == "tdsr") return Setting::tdsr;
  throw InvalidArgument("unknown setting '" + s + "' (expected sdsr or tdsr)");
}
inline DatasetVariant parse_dataset_variant(const std::string& s) {
  for (auto d : {DatasetVariant::bicubic, DatasetVariant::dsgan, DatasetVariant::gt})
    if (to_string(d) == s) return d;
  throw InvalidArgument("unknown dataset variant '" + s + "'");
}
inline SrMethod parse_sr_method(const std::string& s) {
  if (s == "frequency_separated" || s == "fs") return SrMethod::frequency_separated;
  if (s == "plain") return SrMethod::plain;
  throw InvalidArgument("unknown sr method '" + s + "'");
}

inline DegradationSpec corruption_spec(Corruption c, std::uint64_t seed) {
  DegradationSpec s;
  s.seed = seed;
  if (c == Corruption::noise8) {
    s.kind = DegradationKind::gaussian_noise;
    s.sigma = 8.0;
  } else {
    s.kind = DegradationKind::jpeg;
    s.quality = 30;
  }
  return s;
}

struct ExperimentPlan {
  std::string name = "ablation";
  Corruption corruption = Corruption::noise8;
  Setting setting = Setting::sdsr;
  std::vector<DatasetVariant> datasets{DatasetVariant::bicubic, DatasetVariant::dsgan};
  std::vector<SrMethod> sr_methods{SrMethod::frequency_separated};
  ToyCorpusSpec corpus;
  ToyCorpusSpec test_corpus{8, 256, 1007};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainConfig dsgan = TrainConfig::dsgan_defaults();
  TrainConfig sr = TrainConfig::sr_defaults();
  int hf_kernel = 5;
  int hf_margin = 8;

  bool needs_dsgan() const { return std::find(datasets.begin(), datasets.end(), DatasetVariant::dsgan) != datasets.end(); }

  void validate() const {
    require(!name.empty() && name.find('/') == std::string::npos, "experiment name must be a plain directory name");
    require(!datasets.empty() && !sr_methods.empty(), "experiment needs at least one dataset variant and one sr method");
    require(seeds.size() >= 3, "experiments report medians over at least 3 seeds");
    require(corpus.count >= 1 && test_corpus.count >= 1, "experiment corpora must be non-empty");
    require(corpus.size % 8 == 0 && test_corpus.size % 4 == 0, "corpus sizes must allow x2 and x4 downscaling");
    if (needs_dsgan()) {
      require(dsgan.stage == Stage::dsgan, "plan.dsgan must be a dsgan config");
      dsgan.validate();
    }
    require(sr.stage == Stage::sr, "plan.sr must be an sr config");
    sr.validate();
  }
};

struct VariantResult {
  DatasetVariant dataset = DatasetVariant::bicubic;
  SrMethod method = SrMethod::frequency_separated;
  std::vector<ImageMetrics> per_seed;  // corpus means, one per seed
  ImageMetrics median;                 // per-metric median over seeds
};

struct DsganSeedStats {
  std::uint64_t seed = 0;
  double generated_lr_hf = 0;  // mean hf statistic of G_d(B(source))
  double lowpass_l1 = 0;       // mean |low(G_d(x_b)) - low(x_b)|
};

struct AblationReport {
  int version = 1;
  std::string name;
  Corruption corruption = Corruption::noise8;
  Setting setting = Setting::sdsr;
  std::vector<std::uint64_t> seeds;
  double source_hf = 0;       // source domain (corrupted training images)
  double bicubic_lr_hf = 0;   // B(source)
  std::vector<DsganSeedStats> dsgan;
  double dsgan_lr_hf_median = 0;
  std::vector<VariantResult> variants;

  const VariantResult& find(DatasetVariant d, SrMethod m) const {
    for (const auto& v : variants)
      if (v.dataset == d && v.method == m) return v;
    throw InvalidArgument("variant " + to_string(d) + "/" + to_string(m) + " is not part of the report");
  }
};

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct NoiseCheck {
  double statistic = 0;
  double source_stat = 0;
  double ratio = 0;  // statistic / source_stat
  double band = 0;
  bool inside = false;
  bool above = false;  // outside the band on the high side
};

/// Does a set of SR outputs keep the source-domain high-frequency level?
inline NoiseCheck noise_preservation_check(const std::vector<Image>& sr_outputs, double source_stat, double band = 0.35,
                                           int kernel = 5, int margin = 8) {
  require(source_stat > 0, "noise check: source statistic must be positive");
  require(band > 0, "noise check: band must be positive");
  NoiseCheck c;
  c.statistic = mean_hf_std(sr_outputs, make_moving_average(kernel), margin);
  c.source_stat = source_stat;
  c.band = band;
  c.ratio = c.statistic / source_stat;
  c.inside = std::abs(c.ratio - 1.0) <= band;
  c.above = c.ratio > 1.0 + band;
  return c;
}

/// Side-by-side grid: one row per image, equal-sized tiles, 2 px gaps.
inline Image mosaic(const std::vector<std::vector<Image>>& rows, double background = 1.0) {
  require(!rows.empty() && !rows[0].empty(), "mosaic needs at least one tile");
  const int th = rows[0][0].height, tw = rows[0][0].width, gap = 2;
  const int cols = static_cast<int>(rows[0].size());
  Image out(static_cast<int>(rows.size()) * (th + gap) - gap, cols * (tw + gap) - gap, 3, background);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(static_cast<int>(rows[r].size()) == cols, "mosaic rows must have equal length");
    for (int c = 0; c < cols; ++c) {
      const Image& t = rows[r][static_cast<std::size_t>(c)];
      require(t.height == th && t.width == tw && t.channels == 3, "mosaic tiles must share one size");
      for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < th; ++y)
          for (int x = 0; x < tw; ++x) out.at(ch, static_cast<int>(r) * (th + gap) + y, c * (tw + gap) + x) = t.at(ch, y, x);
    }
  }
  return out;
}

inline Image upscale_nearest(const Image& img, int f) {
  Image out(img.height * f, img.width * f, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = img.at(c, y / f, x / f);
  return out;
}

struct ExperimentOptions {
  std::filesystem::path out_dir;      // empty: nothing written
  std::filesystem::path dsgan_cache;  // optional directory of trained DSGAN checkpoints, keyed by config
  std::function<void(const std::string&)> log;
};

/// Everything the variants of one plan train and evaluate on.
struct ExperimentData {
  std::vector<Image> clean, source;   // training corpus and its corrupted copy
  std::vector<Image> test_lr, test_gt;
  DegradationSpec spec;
};

inline ExperimentData make_experiment_data(const ExperimentPlan& plan) {
  ExperimentData d;
  d.clean = make_toy_corpus(plan.corpus);
  d.spec = corruption_spec(plan.corruption, derive_seed(plan.corpus.seed, 0x636f727275707400ULL));
  for (std::size_t i = 0; i < d.clean.size(); ++i) d.source.push_back(apply_degradation(d.clean[i], d.spec, derive_seed(d.spec.seed, i)));
  const auto test_clean = make_toy_corpus(plan.test_corpus);
  const DegradationSpec test_spec = corruption_spec(plan.corruption, derive_seed(plan.test_corpus.seed, 0x7465737400000000ULL));
  for (std::size_t i = 0; i < test_clean.size(); ++i) {
    const ImagePair p = gt_pair(test_clean[i], test_spec, i);
    d.test_lr.push_back(p.lr);
    d.test_gt.push_back(plan.setting == Setting::sdsr ? p.hr : crop_to_multiple(test_clean[i], 4));
  }
  return d;
}

namespace experiment_detail {

inline void say(const ExperimentOptions& opt, const std::string& msg) {
  if (opt.log) opt.log(msg);
}

inline DsganGenerator<double> dsgan_for_seed(const ExperimentPlan& plan, const ExperimentData& data, std::uint64_t seed,
                                             const ExperimentOptions& opt) {
  TrainConfig cfg = plan.dsgan;
  cfg.seed = seed;
  std::filesystem::path cached;
  if (!opt.dsgan_cache.empty()) {
    std::ostringstream key;
    key << serialize_config(cfg) << to_string(plan.corruption) << plan.corpus.count << ',' << plan.corpus.size << ','
        << plan.corpus.seed << ',' << plan.corpus.shapes << ',' << plan.corpus.edge_width;
    cached = opt.dsgan_cache / ("dsgan_" + fnv1a_hex(key.str()) + ".bin");
    if (std::filesystem::exists(cached)) {
      say(opt, "dsgan seed " + std::to_string(seed) + ": cached " + cached.filename().string());
      return load_dsgan_generator(load_checkpoint<float>(cached));
    }
  }
  DsganData dd{data.source, data.source};
  DsganTrainer<float> trainer(cfg, dd);
  say(opt, "dsgan seed " + std::to_string(seed) + ": training " + std::to_string(cfg.iterations) + " steps");
  run_training(trainer);
  if (!cached.empty()) {
    std::filesystem::create_directories(opt.dsgan_cache);
    save_checkpoint(cached, trainer.checkpoint());
  }
  return load_dsgan_generator(trainer.checkpoint());
}

inline PairedData variant_pairs(DatasetVariant v, Setting setting, const ExperimentData& d, const DsganGenerator<double>* gen) {
  PairedData out;
  for (std::size_t i = 0; i < d.source.size(); ++i) {
    ImagePair p;
    if (setting == Setting::sdsr) {
      if (v == DatasetVariant::bicubic) p = bicubic_pair(d.source[i]);
      if (v == DatasetVariant::dsgan) p = sdsr_pair(*gen, d.source[i]);
      if (v == DatasetVariant::gt) p = gt_pair(d.clean[i], d.spec, i);
    } else {
      if (v == DatasetVariant::bicubic) p = bicubic_pair(bicubic_downscale(crop_to_multiple(d.source[i], 8), 2.0));
      if (v == DatasetVariant::dsgan) p = tdsr_pair(*gen, d.source[i]);
      if (v == DatasetVariant::gt) {
        // clean HR at the TDSR scale, corrupted LR
        p.hr = quantize(bicubic_downscale(crop_to_multiple(d.clean[i], 8), 2.0), 16);
        p.lr = apply_degradation(bicubic_downscale(p.hr, 4.0), d.spec, derive_seed(d.spec.seed, i) + 1);
      }
    }
    out.hr.push_back(std::move(p.hr));
    out.lr.push_back(std::move(p.lr));
  }
  return out;
}

inline double lowpass_l1(const DsganGenerator<double>& gen, const std::vector<Image>& sources, const FilterBank& fb) {
  double s = 0;
  for (const auto& src : sources) {
    const Image xb = bicubic_downscale(src, 4.0);
    const Image a = lowpass(apply_network(gen, xb), fb), b = lowpass(xb, fb);
    double e = 0;
    for (std::size_t k = 0; k < a.data.size(); ++k) e += std::abs(a.data[k] - b.data[k]);
    s += e / static_cast<double>(a.data.size());
  }
  return s / static_cast<double>(sources.size());
}

inline ImageMetrics median_metrics(const std::vector<ImageMetrics>& v) {
  std::vector<double> p, s, q, h;
  for (const auto& m : v) {
    p.push_back(m.psnr);
    s.push_back(m.ssim);
    q.push_back(m.perceptual);
    h.push_back(m.hf_std);
  }
  return {"median", median(p), median(s), median(q), median(h)};
}

}  // namespace experiment_detail

inline std::string serialize_ablation_report(const AblationReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "realsr-ablation-report";
  j["version"] = r.version;
  j["name"] = r.name;
  j["corruption"] = to_string(r.corruption);
  j["setting"] = to_string(r.setting);
  j["seeds"] = r.seeds;
  j["source_hf"] = r.source_hf;
  j["bicubic_lr_hf"] = r.bicubic_lr_hf;
  auto ds = nlohmann::ordered_json::array();
  for (const auto& d : r.dsgan) ds.push_back({{"seed", d.seed}, {"generated_lr_hf", d.generated_lr_hf}, {"lowpass_l1", d.lowpass_l1}});
  j["dsgan"] = ds;
  j["dsgan_lr_hf_median"] = r.dsgan_lr_hf_median;
  auto vs = nlohmann::ordered_json::array();
  for (const auto& v : r.variants) {
    nlohmann::ordered_json e;
    e["dataset"] = to_string(v.dataset);
    e["sr_method"] = to_string(v.method);
    e["median"] = detail::metrics_json(v.median);
    auto ps = nlohmann::ordered_json::array();
    for (const auto& m : v.per_seed) ps.push_back(detail::metrics_json(m));
    e["per_seed"] = ps;
    vs.push_back(e);
  }
  j["variants"] = vs;
  return j.dump(2) + "\n";
}

inline AblationReport parse_ablation_report(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("ablation report: ") + e.what());
  }
  if (j.value("format", "") != "realsr-ablation-report") throw DataError("not an ablation report");
  AblationReport r;
  try {
    r.version = j.at("version").get<int>();
    if (r.version != 1) throw DataError("unsupported ablation report version");
    r.name = j.at("name").get<std::string>();
    r.corruption = parse_corruption(j.at("corruption").get<std::string>());
    r.setting = parse_setting(j.at("setting").get<std::string>());
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.source_hf = j.at("source_hf").get<double>();
    r.bicubic_lr_hf = j.at("bicubic_lr_hf").get<double>();
    for (const auto& d : j.at("dsgan"))
      r.dsgan.push_back({d.at("seed").get<std::uint64_t>(), d.at("generated_lr_hf").get<double>(), d.at("lowpass_l1").get<double>()});
    r.dsgan_lr_hf_median = j.at("dsgan_lr_hf_median").get<double>();
    for (const auto& e : j.at("variants")) {
      VariantResult v;
      v.dataset = parse_dataset_variant(e.at("dataset").get<std::string>());
      v.method = parse_sr_method(e.at("sr_method").get<std::string>());
      v.median = detail::metrics_from_json(e.at("median"));
      for (const auto& m : e.at("per_seed")) v.per_seed.push_back(detail::metrics_from_json(m));
      r.variants.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("ablation report: ") + e.what());
  }
  return r;
}

/// Table with one row per (dataset, SR method) and median metrics over seeds.
inline std::string render_ablation_table(const AblationReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os << r.name << "  (" << to_string(r.corruption) << ", " << to_string(r.setting) << ", " << r.seeds.size() << " seeds, medians)\n";
  os.precision(5);
  os << "source hf " << r.source_hf << "   bicubic LR hf " << r.bicubic_lr_hf;
  if (!r.dsgan.empty()) os << "   dsgan LR hf " << r.dsgan_lr_hf_median;
  os << "\n";
  os << "dataset    sr method             PSNR(dB)^   SSIM^    perceptual_v   out hf\n";
  for (const auto& v : r.variants) {
    std::string d = to_string(v.dataset), m = to_string(v.method);
    d.resize(10, ' ');
    m.resize(21, ' ');
    os.precision(2);
    os << d << " " << m << " " << v.median.psnr << "       ";
    os.precision(4);
    os << v.median.ssim << "   " << v.median.perceptual << "         ";
    os.precision(5);
    os << v.median.hf_std << "\n";
  }
  return os.str();
}

/// Trains every (dataset, SR method) combination for every seed and
/// evaluates against the setting's ground truth. Writes report.json,
/// report.txt, the config echoes and mosaic.png into opt.out_dir.
inline AblationReport run_ablation(const ExperimentPlan& plan, const ExperimentOptions& opt = {}) {
  plan.validate();
  using namespace experiment_detail;
  const ExperimentData data = make_experiment_data(plan);
  const FilterBank fb = make_moving_average(plan.hf_kernel);
  const PerceptualExtractor<double> ex;
  EvaluateOptions eval;
  eval.mode = to_string(plan.setting);
  eval.hf_kernel = plan.hf_kernel;
  eval.hf_margin = plan.hf_margin;

  AblationReport rep;
  rep.name = plan.name;
  rep.corruption = plan.corruption;
  rep.setting = plan.setting;
  rep.seeds = plan.seeds;
  rep.source_hf = mean_hf_std(data.source, fb, plan.hf_margin);
  std::vector<Image> bic;
  for (const auto& s : data.source) bic.push_back(bicubic_downscale(s, 4.0));
  rep.bicubic_lr_hf = mean_hf_std(bic, fb, plan.hf_margin);
  for (auto d : plan.datasets)
    for (auto m : plan.sr_methods) rep.variants.push_back({d, m, {}, {}});

  std::vector<std::vector<Image>> tiles;  // first seed only
  for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
    const std::uint64_t seed = plan.seeds[si];
    DsganGenerator<double> gen;
    if (plan.needs_dsgan()) {
      gen = dsgan_for_seed(plan, data, seed, opt);
      std::vector<Image> g;
      for (const auto& b : bic) g.push_back(apply_network(gen, b));
      rep.dsgan.push_back({seed, mean_hf_std(g, fb, plan.hf_margin), lowpass_l1(gen, data.source, make_moving_average(5))});
      say(opt, "dsgan seed " + std::to_string(seed) + ": generated LR hf " + std::to_string(rep.dsgan.back().generated_lr_hf));
    }
    if (si == 0)
      for (std::size_t k = 0; k < std::min<std::size_t>(3, data.test_lr.size()); ++k) tiles.push_back({upscale_nearest(data.test_lr[k], 4)});
    for (auto& v : rep.variants) {
      const PairedData pairs = variant_pairs(v.dataset, plan.setting, data, &gen);
      TrainConfig cfg = plan.sr;
      cfg.seed = seed;
      cfg.sr_method = v.method;
      SrTrainer<float> trainer(cfg, pairs);
      say(opt, to_string(v.dataset) + "/" + to_string(v.method) + " seed " + std::to_string(seed) + ": training");
      run_training(trainer);
      const auto net = load_sr_generator(trainer.checkpoint());
      MetricReport mr;
      mr.images.resize(data.test_lr.size());
      for (std::size_t k = 0; k < data.test_lr.size(); ++k) {
        const Image out = apply_network(net, data.test_lr[k]);
        mr.images[k] = compare_images("test" + std::to_string(k), out, data.test_gt[k], ex, eval);
        if (si == 0 && k < tiles.size()) tiles[k].push_back(out);
      }
      mr.compute_means();
      mr.mean.name = "seed" + std::to_string(seed);
      v.per_seed.push_back(mr.mean);
      say(opt, "  perceptual " + std::to_string(mr.mean.perceptual) + ", output hf " + std::to_string(mr.mean.hf_std));
    }
  }
  std::vector<double> g;
  for (const auto& d : rep.dsgan) g.push_back(d.generated_lr_hf);
  if (!g.empty()) rep.dsgan_lr_hf_median = median(g);
  for (auto& v : rep.variants) v.median = median_metrics(v.per_seed);

  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    write_text_file(opt.out_dir / "report.json", serialize_ablation_report(rep));
    write_text_file(opt.out_dir / "report.txt", render_ablation_table(rep));
    if (plan.needs_dsgan()) write_text_file(opt.out_dir / "dsgan.ini", serialize_config(plan.dsgan));
    write_text_file(opt.out_dir / "sr.ini", serialize_config(plan.sr));
    for (std::size_t k = 0; k < tiles.size(); ++k) tiles[k].push_back(data.test_gt[k]);
    write_png(opt.out_dir / "mosaic.png", mosaic(tiles), 8);
  }
  return rep;
}

}  // namespace realsr

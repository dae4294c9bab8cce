#pragma once

// Paired dataset construction (SDSR, TDSR, bicubic, GT) and the on-disk
// layout out_dir/{hr,lr}/NNNNNN.png + out_dir/manifest.txt.
//
// The manifest is JSON lines: a header object followed by one object per pair.

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "realsr/checkpoint.hpp"
#include "realsr/degrade.hpp"
#include "realsr/error.hpp"
#include "realsr/image.hpp"
#include "realsr/image_io.hpp"
#include "realsr/metrics.hpp"
#include "realsr/models.hpp"
#include "realsr/parallel.hpp"
#include "realsr/resample.hpp"
#include "realsr/training.hpp"

namespace realsr {

enum class DomainTag { X_bicubic, Y_hr, Z_source };
enum class Provenance { bicubic, dsgan, gt_degraded };
enum class DatasetKind { sdsr, tdsr, bicubic, gt };

inline std::string to_string(DomainTag t) {
  switch (t) {
    case DomainTag::X_bicubic: return "X_bicubic";
    case DomainTag::Y_hr: return "Y_hr";
    case DomainTag::Z_source: return "Z_source";
  }
  return "?";
}

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::bicubic: return "bicubic";
    case Provenance::dsgan: return "dsgan";
    case Provenance::gt_degraded: return "gt_degraded";
  }
  return "?";
}

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::sdsr: return "sdsr";
    case DatasetKind::tdsr: return "tdsr";
    case DatasetKind::bicubic: return "bicubic";
    case DatasetKind::gt: return "gt";
  }
  return "?";
}

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<E> values, const char* what) {
  for (E v : values)
    if (to_string(v) == s) return v;
  throw DataError(std::string("unknown ") + what + ": '" + s + "'");
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
  for (DatasetKind k : {DatasetKind::sdsr, DatasetKind::tdsr, DatasetKind::bicubic, DatasetKind::gt})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown dataset mode '" + s + "' (expected sdsr, tdsr, bicubic or gt)");
}

struct PairRecord {
  std::string hr_path;  // relative to the manifest directory
  std::string lr_path;
  DomainTag hr_domain = DomainTag::Y_hr;
  DomainTag lr_domain = DomainTag::X_bicubic;
  Provenance provenance = Provenance::bicubic;
  std::uint64_t seed = 0;
  std::string degradation = "none";
  std::string source;  // name of the input image
  int hr_height = 0, hr_width = 0;
};

struct DatasetManifest {
  int version = 1;
  DatasetKind kind = DatasetKind::bicubic;
  std::string generator_hash;  // producing checkpoint, dsgan provenance only
  std::string encoder = "png16";
  std::vector<PairRecord> records;
};

inline std::string serialize_manifest(const DatasetManifest& m) {
  nlohmann::ordered_json h;
  h["format"] = "realsr-manifest";
  h["version"] = m.version;
  h["kind"] = to_string(m.kind);
  h["generator_hash"] = m.generator_hash;
  h["encoder"] = m.encoder;
  h["count"] = m.records.size();
  std::string out = h.dump() + "\n";
  for (const auto& r : m.records) {
    nlohmann::ordered_json j;
    j["hr"] = r.hr_path;
    j["lr"] = r.lr_path;
    j["hr_domain"] = to_string(r.hr_domain);
    j["lr_domain"] = to_string(r.lr_domain);
    j["provenance"] = to_string(r.provenance);
    j["seed"] = r.seed;
    j["degradation"] = r.degradation;
    j["source"] = r.source;
    j["hr_size"] = {r.hr_height, r.hr_width};
    out += j.dump() + "\n";
  }
  return out;
}

inline DatasetManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  DatasetManifest m;
  try {
    if (!std::getline(in, line)) throw DataError("empty manifest");
    const auto h = nlohmann::ordered_json::parse(line);
    if (h.value("format", "") != "realsr-manifest") throw DataError("not a realsr manifest");
    m.version = h.at("version").get<int>();
    if (m.version != 1) throw DataError("unsupported manifest version " + std::to_string(m.version));
    m.kind = parse_enum(h.at("kind").get<std::string>(), {DatasetKind::sdsr, DatasetKind::tdsr, DatasetKind::bicubic, DatasetKind::gt}, "dataset kind");
    m.generator_hash = h.at("generator_hash").get<std::string>();
    m.encoder = h.at("encoder").get<std::string>();
    const auto count = h.at("count").get<std::size_t>();
    const auto domains = {DomainTag::X_bicubic, DomainTag::Y_hr, DomainTag::Z_source};
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::ordered_json::parse(line);
      PairRecord r;
      r.hr_path = j.at("hr").get<std::string>();
      r.lr_path = j.at("lr").get<std::string>();
      r.hr_domain = parse_enum(j.at("hr_domain").get<std::string>(), domains, "domain");
      r.lr_domain = parse_enum(j.at("lr_domain").get<std::string>(), domains, "domain");
      r.provenance = parse_enum(j.at("provenance").get<std::string>(), {Provenance::bicubic, Provenance::dsgan, Provenance::gt_degraded}, "provenance");
      r.seed = j.at("seed").get<std::uint64_t>();
      r.degradation = j.at("degradation").get<std::string>();
      r.source = j.at("source").get<std::string>();
      r.hr_height = j.at("hr_size").at(0).get<int>();
      r.hr_width = j.at("hr_size").at(1).get<int>();
      m.records.push_back(std::move(r));
    }
    if (m.records.size() != count) throw DataError("manifest count mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

/// An input image with the name it is recorded under.
struct NamedImage {
  std::string name;
  Image image;
};

inline std::vector<NamedImage> read_image_dir(const std::filesystem::path& dir) {
  std::vector<NamedImage> out;
  for (const auto& p : list_images(dir)) out.push_back({p.filename().string(), read_image(p)});
  if (out.empty()) throw DataError("no images in " + dir.string());
  return out;
}

/// Top-left crop to dimensions divisible by `multiple`.
inline Image crop_to_multiple(const Image& img, int multiple) {
  const int h = img.height / multiple * multiple, w = img.width / multiple * multiple;
  if (h == 0 || w == 0) throw DataError("image too small for a x" + std::to_string(multiple) + " pair");
  return (h == img.height && w == img.width) ? img : crop(img, 0, 0, h, w);
}

/// LR side of a DSGAN pair: G_d(B(hr)), clamped to [0,1].
inline Image dsgan_lr(const DsganGenerator<double>& gen, const Image& hr) {
  return apply_network(gen, bicubic_downscale(hr, 4.0));
}

struct BuildOptions {
  int jobs = 1;
  std::string generator_hash;
};

namespace dataset_detail {

inline std::string pair_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu.png", i);
  return buf;
}

// Writes hr/lr 16-bit PNGs; HR is quantized first so that the stored HR is
// exactly the image the LR was computed from.
template <typename MakeLr>
DatasetManifest build(DatasetKind kind, const std::vector<NamedImage>& inputs, const std::filesystem::path& out_dir,
                      const BuildOptions& opt, MakeLr&& make_pair) {
  if (inputs.empty()) throw DataError("no input images");
  std::filesystem::create_directories(out_dir / "hr");
  std::filesystem::create_directories(out_dir / "lr");
  DatasetManifest m;
  m.kind = kind;
  m.generator_hash = opt.generator_hash;
  m.records.resize(inputs.size());
  parallel_for(inputs.size(), opt.jobs, [&](std::size_t i) {
    PairRecord r;
    r.source = inputs[i].name;
    r.hr_path = "hr/" + pair_name(i);
    r.lr_path = "lr/" + pair_name(i);
    auto [hr, lr] = make_pair(i, inputs[i].image, r);
    hr = quantize(hr, 16);
    if (hr.height != 4 * lr.height || hr.width != 4 * lr.width) throw DataError("pair dims violate the x4 contract");
    r.hr_height = hr.height;
    r.hr_width = hr.width;
    write_png(out_dir / r.hr_path, hr, 16);
    write_png(out_dir / r.lr_path, lr, 16);
    m.records[i] = std::move(r);
  });
  write_text_file(out_dir / "manifest.txt", serialize_manifest(m));
  return m;
}

}  // namespace dataset_detail

/// SDSR pair: HR = source image, LR = G_d(B(HR)).
inline ImagePair sdsr_pair(const DsganGenerator<double>& gen, const Image& src) {
  ImagePair p;
  p.hr = quantize(crop_to_multiple(src, 4), 16);
  p.lr = dsgan_lr(gen, p.hr);
  return p;
}

/// TDSR pair: HR = B_2(source) (clean domain), LR = G_d(B(HR)).
inline ImagePair tdsr_pair(const DsganGenerator<double>& gen, const Image& src) {
  ImagePair p;
  p.hr = quantize(bicubic_downscale(crop_to_multiple(src, 8), 2.0), 16);
  p.lr = dsgan_lr(gen, p.hr);
  return p;
}

/// Baseline pair: LR = B(HR).
inline ImagePair bicubic_pair(const Image& hr_image) {
  ImagePair p;
  p.hr = quantize(crop_to_multiple(hr_image, 4), 16);
  p.lr = bicubic_downscale(p.hr, 4.0);
  return p;
}

/// Oracle pair i: the degradation applied independently at both scales with
/// seed derive_seed(spec.seed, i).
inline ImagePair gt_pair(const Image& clean, const DegradationSpec& spec, std::size_t i) {
  DegradationSpec s = spec;
  s.seed = derive_seed(spec.seed, i);
  return make_gt_pair(crop_to_multiple(clean, 4), s, 4.0);
}

inline DatasetManifest build_sdsr_dataset(const std::vector<NamedImage>& sources, const DsganGenerator<double>& gen,
                                          const std::filesystem::path& out_dir, const BuildOptions& opt) {
  return dataset_detail::build(DatasetKind::sdsr, sources, out_dir, opt, [&](std::size_t, const Image& src, PairRecord& r) {
    r.hr_domain = DomainTag::Z_source;
    r.lr_domain = DomainTag::Z_source;
    r.provenance = Provenance::dsgan;
    r.degradation = "dsgan;generator=" + opt.generator_hash;
    return sdsr_pair(gen, src);
  });
}

inline DatasetManifest build_tdsr_dataset(const std::vector<NamedImage>& sources, const DsganGenerator<double>& gen,
                                          const std::filesystem::path& out_dir, const BuildOptions& opt) {
  return dataset_detail::build(DatasetKind::tdsr, sources, out_dir, opt, [&](std::size_t, const Image& src, PairRecord& r) {
    r.hr_domain = DomainTag::Y_hr;
    r.lr_domain = DomainTag::Z_source;
    r.provenance = Provenance::dsgan;
    r.degradation = "dsgan;generator=" + opt.generator_hash;
    return tdsr_pair(gen, src);
  });
}

inline DatasetManifest build_bicubic_dataset(const std::vector<NamedImage>& hr_images, const std::filesystem::path& out_dir,
                                             const BuildOptions& opt) {
  return dataset_detail::build(DatasetKind::bicubic, hr_images, out_dir, opt, [&](std::size_t, const Image& src, PairRecord& r) {
    r.hr_domain = DomainTag::Y_hr;
    r.lr_domain = DomainTag::X_bicubic;
    r.provenance = Provenance::bicubic;
    return bicubic_pair(src);
  });
}

inline DatasetManifest build_gt_dataset(const std::vector<NamedImage>& clean, const DegradationSpec& spec,
                                        const std::filesystem::path& out_dir, const BuildOptions& opt) {
  return dataset_detail::build(DatasetKind::gt, clean, out_dir, opt, [&](std::size_t i, const Image& src, PairRecord& r) {
    r.hr_domain = DomainTag::Z_source;
    r.lr_domain = DomainTag::Z_source;
    r.provenance = Provenance::gt_degraded;
    r.seed = derive_seed(spec.seed, i);
    DegradationSpec s = spec;
    s.seed = r.seed;
    r.degradation = s.describe();
    return gt_pair(src, spec, i);
  });
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
  return parse_manifest(read_text_file(dir / "manifest.txt"));
}

/// Loads every pair; checks existence, decodability and the x4 contract.
inline PairedData load_pairs(const std::filesystem::path& dir, const DatasetManifest& m, int jobs = 1) {
  PairedData d;
  d.hr.resize(m.records.size());
  d.lr.resize(m.records.size());
  parallel_for(m.records.size(), jobs, [&](std::size_t i) {
    const auto& r = m.records[i];
    d.hr[i] = read_image(dir / r.hr_path);
    d.lr[i] = read_image(dir / r.lr_path);
    if (d.hr[i].height != r.hr_height || d.hr[i].width != r.hr_width) throw DataError("hr size differs from manifest: " + r.hr_path);
    if (d.hr[i].height != 4 * d.lr[i].height || d.hr[i].width != 4 * d.lr[i].width)
      throw DataError("pair violates the x4 contract: " + r.lr_path);
  });
  return d;
}

/// Re-runs the generator on each stored HR and compares with the stored LR
/// after the same 16-bit quantization. Returns the largest deviation.
inline double verify_dsgan_outputs(const std::filesystem::path& dir, const DatasetManifest& m, const DsganGenerator<double>& gen,
                                   const std::string& generator_hash) {
  if (m.generator_hash != generator_hash) throw DataError("manifest generator hash does not match the checkpoint");
  double worst = 0;
  for (const auto& r : m.records) {
    if (r.provenance != Provenance::dsgan) continue;
    const Image lr = quantize(dsgan_lr(gen, read_image(dir / r.hr_path)), 16);
    worst = std::max(worst, max_abs_diff(lr, read_image(dir / r.lr_path)));
  }
  return worst;
}

/// Aligned paired patches: LR p x p at (i, j) pairs with HR 4p x 4p at (4i, 4j);
/// the same dihedral transform is applied to both when augment is set.
struct PatchBatch {
  std::vector<Image> hr, lr;
  std::vector<std::pair<int, int>> lr_origin;
};

inline PatchBatch load_batch(const PairedData& data, const std::vector<int>& indices, int patch, bool augment, std::uint64_t seed) {
  Rng rng(seed);
  PatchBatch b;
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= data.lr.size()) throw InvalidArgument("batch index out of range");
    const Image& l = data.lr[static_cast<std::size_t>(idx)];
    const Image& h = data.hr[static_cast<std::size_t>(idx)];
    if (patch < 1 || patch > l.height || patch > l.width) throw InvalidArgument("patch exceeds image bounds");
    const int y = rng.below(l.height - patch + 1), x = rng.below(l.width - patch + 1);
    const int code = augment ? rng.below(8) : 0;
    b.lr.push_back(augment_image(crop(l, y, x, patch, patch), code));
    b.hr.push_back(augment_image(crop(h, 4 * y, 4 * x, 4 * patch, 4 * patch), code));
    b.lr_origin.emplace_back(y, x);
  }
  return b;
}

}  // namespace realsr

// realsr: command-line front end for the DSGAN / frequency-separated SR pipeline.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric divergence.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "realsr/realsr.hpp"

namespace fs = std::filesystem;
using namespace realsr;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

constexpr const char* kDataRootEnv = "REALSR_DATA_ROOT";

std::string tool_version() { return std::string("realsr ") + REALSR_VERSION; }

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* app, Common& c, bool with_config) {
  if (with_config) {
    app->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", c.overrides, "override a config key (section.key=value)")->allow_extra_args(false);
  }
  app->add_option("--seed", c.seed, "root seed")->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "output directory")->required();
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

// Relative input paths resolve against $REALSR_DATA_ROOT when it is set.
fs::path data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) return fs::path(root) / path;
  return path;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

// Writes the run record (tool version, invocation, effective settings) next to the outputs.
void echo_run(const fs::path& out, const std::string& cmdline, const std::string& settings) {
  fs::create_directories(out);
  std::ostringstream os;
  os << "# " << tool_version() << "\n# " << cmdline << "\n" << settings;
  write_text_file(out / "run.ini", os.str());
  write_text_file(out / "VERSION", tool_version() + "\n");
}

TrainConfig load_config(const Common& c, Stage stage) {
  const TrainConfig base = stage == Stage::sr ? TrainConfig::sr_defaults() : TrainConfig::dsgan_defaults();
  TrainConfig cfg = c.config.empty() ? base : parse_config(read_text_file(c.config), base);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (cfg.stage != stage) throw InvalidArgument("config stage does not match the command");
  cfg.validate();
  return cfg;
}

std::vector<Image> images_of(const std::vector<NamedImage>& v) {
  std::vector<Image> out;
  for (const auto& n : v) out.push_back(n.image);
  return out;
}

void progress(const LossRecord& r, std::int64_t total) {
  if ((r.step + 1) % 100 == 0 || r.step + 1 == total)
    std::cerr << "step " << r.step + 1 << "/" << total << "  D " << r.d_total << "  color " << r.g_color << "  texture "
              << r.g_texture << "  perceptual " << r.g_perceptual << "\n";
}

DegradationSpec degradation_from(const std::string& kind, double sigma, int quality, std::uint64_t seed) {
  DegradationSpec s;
  s.kind = parse_degradation_kind(kind);
  s.sigma = sigma;
  s.quality = quality;
  s.seed = seed;
  if (s.kind == DegradationKind::gaussian_noise) require(sigma > 0, "--sigma must be > 0");
  if (s.kind == DegradationKind::jpeg) require(quality >= 1 && quality <= 100, "--quality must lie in [1,100]");
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-world super-resolution: downsampling domain translation and frequency-separated SR"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  const std::string cmdline = command_line(argc, argv);

  // toy-corpus
  Common toy_c;
  ToyCorpusSpec toy;
  auto* toy_cmd = app.add_subcommand("toy-corpus", "write the synthetic clean corpus as PNGs");
  add_common(toy_cmd, toy_c, false);
  toy_cmd->add_option("--count", toy.count)->check(CLI::PositiveNumber);
  toy_cmd->add_option("--size", toy.size)->check(CLI::PositiveNumber);

  // degrade
  Common deg_c;
  std::string deg_in, deg_kind = "noise";
  double deg_sigma = 8.0;
  int deg_quality = 30;
  double deg_scale = 1.0;
  auto* deg_cmd = app.add_subcommand("degrade", "apply noise or JPEG corruption to a directory");
  add_common(deg_cmd, deg_c, false);
  deg_cmd->add_option("--in", deg_in, "input directory")->required();
  deg_cmd->add_option("--kind", deg_kind, "noise | jpeg | none");
  deg_cmd->add_option("--sigma", deg_sigma, "noise std in 8-bit units");
  deg_cmd->add_option("--quality", deg_quality, "JPEG quality");
  deg_cmd->add_option("--downscale", deg_scale, "bicubic downscale factor applied before corruption")->check(CLI::Range(1.0, 16.0));

  // train-dsgan
  Common dsg_c;
  std::string dsg_clean, dsg_source, dsg_resume;
  auto* dsg_cmd = app.add_subcommand("train-dsgan", "train the downsampling generator");
  add_common(dsg_cmd, dsg_c, true);
  dsg_cmd->add_option("--clean", dsg_clean, "clean HR directory (data.hr_dir)");
  dsg_cmd->add_option("--source", dsg_source, "source-domain directory (data.source_dir)");
  dsg_cmd->add_option("--resume", dsg_resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  // make-dataset
  Common mk_c;
  std::string mk_mode, mk_in, mk_ckpt, mk_kind = "noise";
  double mk_sigma = 8.0;
  int mk_quality = 30;
  auto* mk_cmd = app.add_subcommand("make-dataset", "build an HR/LR pair set with a manifest");
  add_common(mk_cmd, mk_c, false);
  mk_cmd->add_option("--mode", mk_mode, "sdsr | tdsr | bicubic | gt")->required();
  mk_cmd->add_option("--in", mk_in, "input directory")->required();
  mk_cmd->add_option("--checkpoint", mk_ckpt, "DSGAN checkpoint (sdsr, tdsr)");
  mk_cmd->add_option("--kind", mk_kind, "gt corruption: noise | jpeg");
  mk_cmd->add_option("--sigma", mk_sigma, "gt noise std in 8-bit units");
  mk_cmd->add_option("--quality", mk_quality, "gt JPEG quality");

  // train-sr
  Common tsr_c;
  std::string tsr_data, tsr_resume;
  auto* tsr_cmd = app.add_subcommand("train-sr", "train the x4 SR generator on a dataset");
  add_common(tsr_cmd, tsr_c, true);
  tsr_cmd->add_option("--data", tsr_data, "dataset directory holding manifest.txt (data.manifest)");
  tsr_cmd->add_option("--resume", tsr_resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  // sr
  Common sr_c;
  std::string sr_ckpt, sr_in;
  auto* sr_cmd = app.add_subcommand("sr", "upscale every image of a directory by 4");
  add_common(sr_cmd, sr_c, false);
  sr_cmd->add_option("--checkpoint", sr_ckpt, "SR checkpoint")->required();
  sr_cmd->add_option("--in", sr_in, "input directory")->required();

  // evaluate
  Common ev_c;
  std::string ev_sr, ev_gt, ev_mode = "sdsr";
  auto* ev_cmd = app.add_subcommand("evaluate", "PSNR / SSIM / perceptual table against ground truth");
  add_common(ev_cmd, ev_c, false);
  ev_cmd->add_option("--sr", ev_sr, "SR output directory")->required();
  ev_cmd->add_option("--gt", ev_gt, "ground-truth directory")->required();
  ev_cmd->add_option("--mode", ev_mode, "sdsr (corrupted GT) | tdsr (clean GT)")->check(CLI::IsMember({"sdsr", "tdsr"}));

  // ablation
  Common ab_c;
  std::string ab_name = "ablation", ab_corruption = "noise8", ab_setting = "sdsr", ab_cache;
  std::vector<std::string> ab_datasets{"bicubic", "dsgan"}, ab_methods{"frequency_separated"};
  std::vector<std::uint64_t> ab_seeds{0, 1, 2};
  std::string ab_dsgan_cfg, ab_sr_cfg;
  auto* ab_cmd = app.add_subcommand("ablation", "train and compare dataset / SR-method combinations on the toy corpus");
  add_common(ab_cmd, ab_c, true);
  ab_cmd->add_option("--name", ab_name);
  ab_cmd->add_option("--corruption", ab_corruption, "noise8 | jpeg30");
  ab_cmd->add_option("--setting", ab_setting, "sdsr | tdsr");
  ab_cmd->add_option("--datasets", ab_datasets, "subset of bicubic, dsgan, gt");
  ab_cmd->add_option("--methods", ab_methods, "subset of frequency_separated, plain");
  ab_cmd->add_option("--seeds", ab_seeds);
  ab_cmd->add_option("--dsgan-config", ab_dsgan_cfg, "DSGAN stage INI")->check(CLI::ExistingFile);
  ab_cmd->add_option("--sr-config", ab_sr_cfg, "SR stage INI")->check(CLI::ExistingFile);
  ab_cmd->add_option("--dsgan-cache", ab_cache, "directory reusing trained DSGAN checkpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*toy_cmd) {
      if (toy_c.seed >= 0) toy.seed = static_cast<std::uint64_t>(toy_c.seed);
      const fs::path out(toy_c.out);
      const auto imgs = make_toy_corpus(toy);
      fs::create_directories(out);
      for (std::size_t i = 0; i < imgs.size(); ++i) write_png(out / dataset_detail::pair_name(i), imgs[i], 16);
      echo_run(out, cmdline,
               "[toy]\ncount = " + std::to_string(toy.count) + "\nsize = " + std::to_string(toy.size) +
                   "\nseed = " + std::to_string(toy.seed) + "\n");
    } else if (*deg_cmd) {
      const auto inputs = read_image_dir(data_path(deg_in));
      const auto spec = degradation_from(deg_kind, deg_sigma, deg_quality, deg_c.seed >= 0 ? deg_c.seed : 0);
      const fs::path out(deg_c.out);
      fs::create_directories(out);
      parallel_for(inputs.size(), deg_c.jobs, [&](std::size_t i) {
        Image img = deg_scale > 1.0 ? bicubic_downscale(crop_to_multiple(inputs[i].image, static_cast<int>(deg_scale)), deg_scale)
                                    : inputs[i].image;
        img = apply_degradation(img, spec, derive_seed(spec.seed, i));
        write_png(out / fs::path(inputs[i].name).replace_extension(".png"), img, 16);
      });
      echo_run(out, cmdline,
               "[degrade]\nspec = " + spec.describe() + "\ndownscale = " + config_detail::fmt_double(deg_scale) +
                   "\nper_image_seed = derive_seed(seed, index)\n");
    } else if (*dsg_cmd) {
      if (!dsg_clean.empty()) dsg_c.overrides.push_back("data.hr_dir=" + dsg_clean);
      if (!dsg_source.empty()) dsg_c.overrides.push_back("data.source_dir=" + dsg_source);
      const TrainConfig cfg = load_config(dsg_c, Stage::dsgan);
      if (cfg.hr_dir.empty() || cfg.source_dir.empty()) throw InvalidArgument("train-dsgan needs --clean and --source");
      DsganData data;
      data.hr = images_of(read_image_dir(data_path(cfg.hr_dir)));
      data.source = images_of(read_image_dir(data_path(cfg.source_dir)));
      const fs::path out(dsg_c.out);
      echo_run(out, cmdline, serialize_config(cfg));
      DsganTrainer<float> trainer(cfg, data);
      run_training(trainer, {out, dsg_resume, [&](const LossRecord& r) { progress(r, cfg.iterations); }});
      std::cout << "checkpoint " << (out / "checkpoint.bin").string() << "  hash " << checkpoint_hash(out / "checkpoint.bin")
                << "\n";
    } else if (*mk_cmd) {
      const DatasetKind kind = parse_dataset_kind(mk_mode);
      const auto inputs = read_image_dir(data_path(mk_in));
      const fs::path out(mk_c.out);
      BuildOptions opt;
      opt.jobs = mk_c.jobs;
      std::string settings = "[dataset]\nmode = " + mk_mode + "\n";
      if (kind == DatasetKind::sdsr || kind == DatasetKind::tdsr) {
        if (mk_ckpt.empty()) throw InvalidArgument("--checkpoint is required for sdsr and tdsr datasets");
        const fs::path ck = data_path(mk_ckpt);
        opt.generator_hash = checkpoint_hash(ck);
        const auto gen = load_dsgan_generator(load_checkpoint<float>(ck));
        settings += "generator = " + opt.generator_hash + "\n";
        if (kind == DatasetKind::sdsr)
          build_sdsr_dataset(inputs, gen, out, opt);
        else
          build_tdsr_dataset(inputs, gen, out, opt);
      } else if (kind == DatasetKind::bicubic) {
        build_bicubic_dataset(inputs, out, opt);
      } else {
        const auto spec = degradation_from(mk_kind, mk_sigma, mk_quality, mk_c.seed >= 0 ? mk_c.seed : 0);
        settings += "degradation = " + spec.describe() + "\n";
        build_gt_dataset(inputs, spec, out, opt);
      }
      echo_run(out, cmdline, settings);
      std::cout << inputs.size() << " pairs written to " << out.string() << "\n";
    } else if (*tsr_cmd) {
      if (!tsr_data.empty()) tsr_c.overrides.push_back("data.manifest=" + tsr_data);
      const TrainConfig cfg = load_config(tsr_c, Stage::sr);
      if (cfg.manifest.empty()) throw InvalidArgument("train-sr needs --data");
      const fs::path dir = data_path(cfg.manifest);
      const PairedData data = load_pairs(dir, read_manifest(dir), tsr_c.jobs);
      const fs::path out(tsr_c.out);
      echo_run(out, cmdline, serialize_config(cfg));
      SrTrainer<float> trainer(cfg, data);
      run_training(trainer, {out, tsr_resume, [&](const LossRecord& r) { progress(r, cfg.iterations); }});
      std::cout << "checkpoint " << (out / "checkpoint.bin").string() << "\n";
    } else if (*sr_cmd) {
      const fs::path ck = data_path(sr_ckpt);
      const auto net = load_sr_generator(load_checkpoint<float>(ck));
      const auto files = list_images(data_path(sr_in));
      if (files.empty()) throw DataError("no images in " + sr_in);
      const fs::path out(sr_c.out);
      fs::create_directories(out);
      parallel_for(files.size(), sr_c.jobs, [&](std::size_t i) {
        write_png(out / files[i].filename().replace_extension(".png"), apply_network(net, read_image(files[i])), 16);
      });
      echo_run(out, cmdline, "[sr]\ncheckpoint = " + ck.string() + "\nhash = " + checkpoint_hash(ck) + "\n");
    } else if (*ev_cmd) {
      EvaluateOptions opt;
      opt.mode = ev_mode;
      opt.jobs = ev_c.jobs;
      const PerceptualExtractor<double> ex;
      const MetricReport r = evaluate(data_path(ev_sr), data_path(ev_gt), ex, opt);
      const fs::path out(ev_c.out);
      echo_run(out, cmdline, "[evaluate]\nmode = " + ev_mode + "\n");
      write_text_file(out / "report.json", serialize_report(r));
      const std::string table = render_table(r);
      write_text_file(out / "report.txt", table);
      std::cout << table;
    } else if (*ab_cmd) {
      ExperimentPlan plan;
      plan.name = ab_name;
      plan.corruption = parse_corruption(ab_corruption);
      plan.setting = parse_setting(ab_setting);
      plan.datasets.clear();
      for (const auto& d : ab_datasets) plan.datasets.push_back(parse_dataset_variant(d));
      plan.sr_methods.clear();
      for (const auto& m : ab_methods) plan.sr_methods.push_back(parse_sr_method(m));
      plan.seeds = ab_seeds;
      if (ab_c.seed >= 0) plan.corpus.seed = static_cast<std::uint64_t>(ab_c.seed);
      if (!ab_dsgan_cfg.empty()) plan.dsgan = parse_config(read_text_file(ab_dsgan_cfg), TrainConfig::dsgan_defaults());
      if (!ab_sr_cfg.empty()) plan.sr = parse_config(read_text_file(ab_sr_cfg), TrainConfig::sr_defaults());
      // --set dsgan.<key>=v / sr.<key>=v target one stage.
      for (const auto& o : ab_c.overrides) {
        if (o.rfind("dsgan.", 0) == 0)
          apply_override(plan.dsgan, o.substr(6));
        else if (o.rfind("sr.", 0) == 0)
          apply_override(plan.sr, o.substr(3));
        else
          throw InvalidArgument("ablation overrides must start with dsgan. or sr.: " + o);
      }
      const fs::path out = fs::path(ab_c.out) / "experiments" / plan.name;
      ExperimentOptions opt;
      opt.out_dir = out;
      opt.dsgan_cache = ab_cache;
      opt.log = [](const std::string& m) { std::cerr << m << "\n"; };
      const AblationReport rep = run_ablation(plan, opt);
      echo_run(out, cmdline, "[ablation]\ncorruption = " + ab_corruption + "\nsetting = " + ab_setting + "\n");
      std::cout << render_ablation_table(rep);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "realsr/checkpoint.hpp"
#include "realsr/config.hpp"
#include "realsr/error.hpp"
#include "realsr/image.hpp"
#include "realsr/kernels.hpp"
#include "realsr/losses.hpp"
#include "realsr/models.hpp"
#include "realsr/optim.hpp"
#include "realsr/resample.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"

namespace realsr {

/// Learning rate at a step of a run with config.iterations total steps.
inline double lr_at(std::int64_t step, const TrainConfig& c) {
  const std::int64_t total = c.iterations;
  if (step < 0 || step > total) throw InvalidArgument("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
  if (c.schedule == Schedule::constant_then_linear_decay) {
    const double half = total / 2.0;
    if (step < half) return c.lr_initial;
    return c.lr_initial * (static_cast<double>(total) - static_cast<double>(step)) / (static_cast<double>(total) - half);
  }
  // The pixel warmup stands in for a pretrained start: constant LR, and the
  // milestones are fractions of the steps that follow it.
  const std::int64_t warm = std::min<std::int64_t>(c.warmup_pixel_iters, total);
  if (step < warm || warm == total) return c.lr_initial;
  const double span = static_cast<double>(total - warm);
  int passed = 0;
  for (double f : {0.1, 0.2, 0.4, 0.6})
    if (step - warm >= static_cast<std::int64_t>(std::ceil(f * span - 1e-9))) ++passed;
  return std::ldexp(c.lr_initial, -passed);
}

inline std::int64_t steps_per_epoch(std::size_t n_images, int batch_size) {
  require(n_images > 0 && batch_size > 0, "steps_per_epoch: empty dataset or batch");
  return static_cast<std::int64_t>((n_images + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

/// Image indices of the batch used at `step`: epochs walk a seeded permutation,
/// the last batch of an epoch may be short.
inline std::vector<int> batch_indices(std::int64_t step, std::size_t n_images, int batch_size, std::uint64_t seed) {
  const std::int64_t spe = steps_per_epoch(n_images, batch_size);
  const std::int64_t epoch = step / spe, pos = step % spe;
  std::vector<int> perm(n_images);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0x6570000000000000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(perm.begin(), perm.end());
  const std::size_t b0 = static_cast<std::size_t>(pos) * static_cast<std::size_t>(batch_size);
  const std::size_t b1 = std::min(n_images, b0 + static_cast<std::size_t>(batch_size));
  return {perm.begin() + static_cast<std::ptrdiff_t>(b0), perm.begin() + static_cast<std::ptrdiff_t>(b1)};
}

/// One of the 8 dihedral transforms: quarter turns (code % 4), then a horizontal flip if code >= 4.
template <typename T>
BasicImage<T> augment_image(const BasicImage<T>& img, int code) {
  BasicImage<T> out = rotate90(img, code % 4);
  return code >= 4 ? flip(out, Flip::horizontal) : out;
}

template <typename T>
Tensor<T> crop_tensor(const Tensor<T>& x, int y0, int x0, int h, int w) {
  require(y0 >= 0 && x0 >= 0 && y0 + h <= x.h && x0 + w <= x.w, "crop outside tensor");
  Tensor<T> y(x.n, x.c, h, w);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      for (int r = 0; r < h; ++r) std::copy_n(x.channel(b, c) + static_cast<std::size_t>(y0 + r) * x.w + x0, w, y.channel(b, c) + static_cast<std::size_t>(r) * w);
  return y;
}

/// Adjoint of crop_tensor: places g into a zero tensor of the original size.
template <typename T>
Tensor<T> uncrop_tensor(const Tensor<T>& g, int h, int w, int y0, int x0) {
  Tensor<T> out(g.n, g.c, h, w);
  for (int b = 0; b < g.n; ++b)
    for (int c = 0; c < g.c; ++c)
      for (int r = 0; r < g.h; ++r) std::copy_n(g.channel(b, c) + static_cast<std::size_t>(r) * g.w, g.w, out.channel(b, c) + static_cast<std::size_t>(y0 + r) * w + x0);
  return out;
}

/// Losses of one training step. Discriminator fields are zero during SR warmup.
struct LossRecord {
  std::int64_t step = 0;
  double lr = 0;
  bool warmup = false;
  double d_total = 0, d_real = 0, d_fake = 0;
  double g_total = 0, g_color = 0, g_texture = 0, g_perceptual = 0;

  bool finite() const {
    for (double v : {d_total, d_real, d_fake, g_total, g_color, g_texture, g_perceptual})
      if (!std::isfinite(v)) return false;
    return true;
  }

  StepRecord to_step_record() const {
    return {step, {lr, warmup ? 1.0 : 0.0, d_total, d_real, d_fake, g_total, g_color, g_texture, g_perceptual}};
  }

  static LossRecord from_step_record(const StepRecord& r) {
    if (r.fields.size() != 9) throw DataError("checkpoint: malformed loss record");
    const auto& f = r.fields;
    return {r.step, f[0], f[1] != 0.0, f[2], f[3], f[4], f[5], f[6], f[7], f[8]};
  }

  std::string to_json_line() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["lr"] = lr;
    j["phase"] = warmup ? "warmup" : "adversarial";
    j["d_loss"] = d_total;
    j["d_real"] = d_real;
    j["d_fake"] = d_fake;
    j["g_loss"] = g_total;
    j["g_color"] = g_color;
    j["g_texture"] = g_texture;
    j["g_perceptual"] = g_perceptual;
    return j.dump() + "\n";
  }
};

inline void check_finite(const LossRecord& r, bool params_ok) {
  if (r.finite() && params_ok) return;
  throw DivergenceError("non-finite training state at step " + std::to_string(r.step) + ": " + r.to_json_line());
}

/// Unpaired DSGAN data: clean-side HR images and source-domain images.
struct DsganData {
  std::vector<Image> hr;
  std::vector<Image> source;
};

/// Paired SR data (HR = 4 x LR in both dimensions).
struct PairedData {
  std::vector<Image> hr;
  std::vector<Image> lr;
};

template <typename T>
struct DsganBatch {
  Tensor<T> bicubic;  // B(hr patch), the generator input and color reference
  Tensor<T> source;   // real crops for the discriminator
  int fake_y = 0, fake_x = 0;  // where the discriminator crop sits inside the generator output
};

template <typename T>
struct PairedBatch {
  Tensor<T> lr, hr;
  int disc_y = 0, disc_x = 0;
};

namespace train_detail {

inline Image random_patch(const Image& img, int size, Rng& rng, bool augment, const char* what) {
  if (img.height < size || img.width < size)
    throw DataError(std::string(what) + " image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                    " is smaller than the patch size " + std::to_string(size));
  const int y = rng.below(img.height - size + 1);
  const int x = rng.below(img.width - size + 1);
  Image p = crop(img, y, x, size, size);
  return augment ? augment_image(p, rng.below(8)) : p;
}

}  // namespace train_detail

/// Stacks a and b along the batch axis.
template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.c == b.c && a.h == b.h && a.w == b.w, "concat_batch: shape mismatch");
  Tensor<T> out(a.n + b.n, a.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

/// Batch items [first, first + count).
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= x.n, "slice_batch: range outside tensor");
  Tensor<T> out(count, x.c, x.h, x.w);
  const std::size_t per = static_cast<std::size_t>(x.c) * x.h * x.w;
  std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(per * first), per * count, out.data.begin());
  return out;
}

/// Shared discriminator update: real and fake crops pass through the
/// discriminator as one batch, so batch normalization sees both and the
/// scores stay sensitive to the overall amplitude of the input. Standard
/// logistic objective, one Adam step. The fake input is plain data here, so no
/// generator parameter can receive gradient from this update.
template <typename T>
DiscLoss<T> discriminator_update(PatchDiscriminator<T>& disc, const Tensor<T>& real_in, const Tensor<T>& fake_in, double lr,
                                 const AdamConfig& adam) {
  typename PatchDiscriminator<T>::Trace tr;
  const Tensor<T> s = disc.forward(concat_batch(real_in, fake_in), Phase::train, &tr);
  DiscLoss<T> dl = adversarial_disc_loss(slice_batch(s, 0, real_in.n), slice_batch(s, real_in.n, fake_in.n));
  Gradients<T> g(disc.params());
  disc.backward(tr, concat_batch(dl.grad_real, dl.grad_fake), &g, false);
  if (!g.all_finite()) throw DivergenceError("non-finite discriminator gradient");
  adam_step(disc.params(), g, lr, adam);
  return dl;
}

/// Scores for a generated image and the map from a score gradient back to an
/// image gradient (through the discriminator, high-pass and crop). The fake
/// crops share a batch with real_in, as in the discriminator update; only the
/// fake scores are returned. The discriminator accumulates no parameter
/// gradient here.
template <typename T>
struct AdversarialPath {
  Tensor<T> scores;
  std::function<Tensor<T>(const Tensor<T>&)> to_image_grad;
};

template <typename T>
AdversarialPath<T> adversarial_path(PatchDiscriminator<T>& disc, const Tensor<T>& real_in, const Tensor<T>& fake,
                                    const FilterBank* hp, int y0, int x0, int crop) {
  auto tr = std::make_shared<typename PatchDiscriminator<T>::Trace>();
  const bool cropped = crop < fake.h || crop < fake.w;
  Tensor<T> in = cropped ? crop_tensor(fake, y0, x0, crop, crop) : fake;
  if (hp) in = highpass(in, *hp);
  const int nr = real_in.n, nf = in.n;
  AdversarialPath<T> out;
  out.scores = slice_batch(disc.forward(concat_batch(real_in, in), Phase::train, tr.get()), nr, nf);
  const int h = fake.h, w = fake.w;
  const PatchDiscriminator<T>* d = &disc;
  out.to_image_grad = [=](const Tensor<T>& gs) {
    Tensor<T> full(nr + nf, gs.c, gs.h, gs.w);
    std::copy(gs.data.begin(), gs.data.end(), full.data.begin() + static_cast<std::ptrdiff_t>(full.data.size() - gs.data.size()));
    Tensor<T> g = slice_batch(d->backward(*tr, full, nullptr, true), nr, nf);
    if (hp) g = highpass_adjoint(g, *hp);
    return cropped ? uncrop_tensor(g, h, w, y0, x0) : g;
  };
  return out;
}

/// DSGAN: G_d maps bicubic LR patches to the source domain; D_d compares
/// high-pass bands of generated and real source crops.
template <typename T = float>
class DsganTrainer {
 public:
  using value_type = T;

  DsganTrainer(const TrainConfig& cfg, const DsganData& data)
      : cfg_(cfg),
        data_(&data),
        gen_(cfg.generator, derive_seed(cfg.seed, 1)),
        disc_(cfg.discriminator, derive_seed(cfg.seed, 2)),
        fb_(make_moving_average(cfg.filter_kernel)),
        rng_(derive_seed(cfg.seed, 3)) {
    cfg_.validate();
    require(cfg_.stage == Stage::dsgan, "DsganTrainer needs train.stage = dsgan");
    if (data.hr.empty() || data.source.empty()) throw DataError("dsgan training needs HR and source images");
  }
  // The trainer keeps a pointer to the data.
  DsganTrainer(const TrainConfig&, DsganData&&) = delete;

  const TrainConfig& config() const { return cfg_; }
  DsganGenerator<T>& generator() { return gen_; }
  PatchDiscriminator<T>& discriminator() { return disc_; }
  const PerceptualExtractor<T>& extractor() const { return ex_; }
  std::int64_t step() const { return step_; }
  const std::vector<LossRecord>& history() const { return history_; }
  bool done() const { return step_ >= cfg_.iterations; }

  DsganBatch<T> next_batch() {
    const auto idx = batch_indices(step_, data_->hr.size(), cfg_.batch_size, cfg_.seed);
    std::vector<Image> lr, src;
    for (int i : idx) {
      const Image p = train_detail::random_patch(data_->hr[static_cast<std::size_t>(i)], cfg_.hr_patch, rng_, cfg_.augment, "hr");
      lr.push_back(bicubic_downscale(p, static_cast<double>(cfg_.scale_factor)));
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& s = data_->source[static_cast<std::size_t>(rng_.below(static_cast<int>(data_->source.size())))];
      src.push_back(train_detail::random_patch(s, cfg_.disc_crop, rng_, cfg_.augment, "source"));
    }
    DsganBatch<T> b;
    b.bicubic = to_tensor<T>(lr);
    b.source = to_tensor<T>(src);
    const int lr_size = cfg_.hr_patch / cfg_.scale_factor;
    b.fake_y = rng_.below(lr_size - cfg_.disc_crop + 1);
    b.fake_x = rng_.below(lr_size - cfg_.disc_crop + 1);
    return b;
  }

  /// Generator objective under the current discriminator; accumulates its
  /// parameter gradient into *g when given.
  GeneratorLoss<T> generator_objective(const DsganBatch<T>& b, Gradients<T>* g) {
    typename DsganGenerator<T>::Trace tr;
    const Tensor<T> fake = gen_.forward(b.bicubic, &tr);
    auto path = adversarial_path(disc_, highpass(b.source, fb_), fake, &fb_, b.fake_y, b.fake_x, cfg_.disc_crop);
    auto gl = dsgan_generator_loss(fake, b.bicubic, path.scores, cfg_.weights, fb_, ex_);
    if (g) {
      gl.grad_image += path.to_image_grad(gl.grad_scores);
      gen_.backward(tr, gl.grad_image, g, false);
    }
    return gl;
  }

  LossRecord train_step() { return train_step(next_batch()); }

  LossRecord train_step(const DsganBatch<T>& b) {
    LossRecord rec;
    rec.step = step_;
    rec.lr = lr_at(step_, cfg_);
    const AdamConfig adam{cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
    const int crop = cfg_.disc_crop;

    // (a) discriminator on detached fakes
    const Tensor<T> fake_detached = gen_.forward(b.bicubic);
    const Tensor<T> fake_in = highpass(crop_tensor(fake_detached, b.fake_y, b.fake_x, crop, crop), fb_);
    const auto dl = discriminator_update(disc_, highpass(b.source, fb_), fake_in, rec.lr, adam);
    rec.d_total = dl.value;
    rec.d_real = dl.real_term;
    rec.d_fake = dl.fake_term;

    // (b) generator
    Gradients<T> g(gen_.params());
    const auto gl = generator_objective(b, &g);
    rec.g_total = gl.total;
    rec.g_color = gl.color;
    rec.g_texture = gl.texture;
    rec.g_perceptual = gl.perceptual;
    check_finite(rec, g.all_finite());
    adam_step(gen_.params(), g, rec.lr, adam);
    check_finite(rec, gen_.params().all_finite() && disc_.params().all_finite());

    ++step_;
    history_.push_back(rec);
    return rec;
  }

  Checkpoint<T> checkpoint() const {
    Checkpoint<T> c;
    c.kind = "dsgan";
    c.config = serialize_config(cfg_);
    c.step = step_;
    c.rng_state = rng_.state();
    c.sets = {{"generator", gen_.params()}, {"discriminator", disc_.params()}};
    for (const auto& r : history_) c.history.push_back(r.to_step_record());
    return c;
  }

  void restore(const Checkpoint<T>& c) {
    if (c.kind != "dsgan") throw DataError("checkpoint kind '" + c.kind + "' is not a dsgan checkpoint");
    restore_parameters(gen_.params(), c.set("generator"));
    restore_parameters(disc_.params(), c.set("discriminator"));
    step_ = c.step;
    rng_.set_state(c.rng_state);
    history_.clear();
    for (const auto& r : c.history) history_.push_back(LossRecord::from_step_record(r));
  }

 private:
  TrainConfig cfg_;
  const DsganData* data_;
  DsganGenerator<T> gen_;
  PatchDiscriminator<T> disc_;
  PerceptualExtractor<T> ex_;
  FilterBank fb_;
  Rng rng_;
  std::int64_t step_ = 0;
  std::vector<LossRecord> history_;
};

/// x4 SR with frequency separation: color loss on the low band, adversarial
/// loss on the high band, perceptual loss on the full image. A pixel-loss
/// warmup stands in for pretrained initialization.
template <typename T = float>
class SrTrainer {
 public:
  using value_type = T;

  SrTrainer(const TrainConfig& cfg, const PairedData& data)
      : cfg_(cfg),
        data_(&data),
        gen_(cfg.sr_generator, derive_seed(cfg.seed, 1)),
        disc_(cfg.discriminator, derive_seed(cfg.seed, 2)),
        fb_(make_moving_average(cfg.sr_method == SrMethod::frequency_separated ? cfg.filter_kernel : 1)),
        full_band_(make_moving_average(1)),
        rng_(derive_seed(cfg.seed, 3)) {
    cfg_.validate();
    require(cfg_.stage == Stage::sr, "SrTrainer needs train.stage = sr");
    if (data.hr.empty() || data.hr.size() != data.lr.size()) throw DataError("sr training needs matching HR/LR lists");
    for (std::size_t i = 0; i < data.hr.size(); ++i)
      if (data.hr[i].height != 4 * data.lr[i].height || data.hr[i].width != 4 * data.lr[i].width)
        throw DataError("pair " + std::to_string(i) + ": HR must be 4x LR");
  }
  SrTrainer(const TrainConfig&, PairedData&&) = delete;

  const TrainConfig& config() const { return cfg_; }
  SRGenerator<T>& generator() { return gen_; }
  PatchDiscriminator<T>& discriminator() { return disc_; }
  std::int64_t step() const { return step_; }
  const std::vector<LossRecord>& history() const { return history_; }
  bool done() const { return step_ >= cfg_.iterations; }

  PairedBatch<T> next_batch() {
    const auto idx = batch_indices(step_, data_->hr.size(), cfg_.batch_size, cfg_.seed);
    const int p = cfg_.hr_patch / 4;
    std::vector<Image> lr, hr;
    for (int i : idx) {
      const Image& l = data_->lr[static_cast<std::size_t>(i)];
      const Image& h = data_->hr[static_cast<std::size_t>(i)];
      if (l.height < p || l.width < p) throw DataError("lr image smaller than the patch size");
      const int y = rng_.below(l.height - p + 1), x = rng_.below(l.width - p + 1);
      const int code = cfg_.augment ? rng_.below(8) : 0;
      lr.push_back(augment_image(crop(l, y, x, p, p), code));
      hr.push_back(augment_image(crop(h, 4 * y, 4 * x, 4 * p, 4 * p), code));
    }
    PairedBatch<T> b;
    b.lr = to_tensor<T>(lr);
    b.hr = to_tensor<T>(hr);
    b.disc_y = rng_.below(cfg_.hr_patch - cfg_.disc_crop + 1);
    b.disc_x = rng_.below(cfg_.hr_patch - cfg_.disc_crop + 1);
    return b;
  }

  /// Adversarial-phase generator objective under the current discriminator;
  /// accumulates its parameter gradient into *g when given.
  GeneratorLoss<T> generator_objective(const PairedBatch<T>& b, Gradients<T>* g) {
    typename SRGenerator<T>::Trace tr;
    const Tensor<T> sr = gen_.forward(b.lr, &tr);
    auto path = adversarial_path(disc_, disc_input(b.hr, b), sr, disc_filter(), b.disc_y, b.disc_x, cfg_.disc_crop);
    auto gl = sr_generator_loss(sr, b.hr, path.scores, cfg_.weights, fb_, ex_);
    if (g) {
      gl.grad_image += path.to_image_grad(gl.grad_scores);
      gen_.backward(tr, gl.grad_image, g);
    }
    return gl;
  }

  LossRecord train_step() { return train_step(next_batch()); }

  LossRecord train_step(const PairedBatch<T>& b) {
    LossRecord rec;
    rec.step = step_;
    rec.lr = lr_at(step_, cfg_);
    rec.warmup = step_ < cfg_.warmup_pixel_iters;
    const AdamConfig adam{cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
    Gradients<T> g(gen_.params());

    if (rec.warmup) {
      typename SRGenerator<T>::Trace tr;
      const Tensor<T> sr = gen_.forward(b.lr, &tr);
      auto col = color_loss(sr, b.hr, full_band_);
      gen_.backward(tr, col.grad, &g);
      rec.g_total = rec.g_color = col.value;
    } else {
      const auto dl = discriminator_update(disc_, disc_input(b.hr, b), disc_input(gen_.forward(b.lr), b), rec.lr, adam);
      rec.d_total = dl.value;
      rec.d_real = dl.real_term;
      rec.d_fake = dl.fake_term;

      const auto gl = generator_objective(b, &g);
      rec.g_total = gl.total;
      rec.g_color = gl.color;
      rec.g_texture = gl.texture;
      rec.g_perceptual = gl.perceptual;
    }
    check_finite(rec, g.all_finite());
    adam_step(gen_.params(), g, rec.lr, adam);
    check_finite(rec, gen_.params().all_finite() && disc_.params().all_finite());
    ++step_;
    history_.push_back(rec);
    return rec;
  }

  Checkpoint<T> checkpoint() const {
    Checkpoint<T> c;
    c.kind = "sr";
    c.config = serialize_config(cfg_);
    c.step = step_;
    c.rng_state = rng_.state();
    c.sets = {{"generator", gen_.params()}, {"discriminator", disc_.params()}};
    for (const auto& r : history_) c.history.push_back(r.to_step_record());
    return c;
  }

  void restore(const Checkpoint<T>& c) {
    if (c.kind != "sr") throw DataError("checkpoint kind '" + c.kind + "' is not an sr checkpoint");
    restore_parameters(gen_.params(), c.set("generator"));
    restore_parameters(disc_.params(), c.set("discriminator"));
    step_ = c.step;
    rng_.set_state(c.rng_state);
    history_.clear();
    for (const auto& r : c.history) history_.push_back(LossRecord::from_step_record(r));
  }

 private:
  TrainConfig cfg_;
  const PairedData* data_;
  const FilterBank* disc_filter() const { return cfg_.sr_method == SrMethod::frequency_separated ? &fb_ : nullptr; }

  // Crop at the batch's discriminator offset, then high-pass when frequency separated.
  Tensor<T> disc_input(const Tensor<T>& x, const PairedBatch<T>& b) const {
    const int crop = cfg_.disc_crop;
    Tensor<T> c = crop < x.h ? crop_tensor(x, b.disc_y, b.disc_x, crop, crop) : x;
    return disc_filter() ? highpass(c, *disc_filter()) : c;
  }

  SRGenerator<T> gen_;
  PatchDiscriminator<T> disc_;
  PerceptualExtractor<T> ex_;
  FilterBank fb_, full_band_;
  Rng rng_;
  std::int64_t step_ = 0;
  std::vector<LossRecord> history_;
};

struct RunOptions {
  std::filesystem::path out_dir;            // empty: keep everything in memory
  std::filesystem::path resume_from;        // optional checkpoint to continue from
  std::function<void(const LossRecord&)> on_step;  // progress hook
};

/// Drives a trainer to config.iterations: writes the config echo, a JSON-lines
/// loss log, periodic checkpoints and final checkpoint.bin under out_dir.
template <typename Trainer>
void run_training(Trainer& trainer, const RunOptions& opt = {}) {
  using T = typename Trainer::value_type;
  if (!opt.resume_from.empty()) trainer.restore(load_checkpoint<T>(opt.resume_from));
  std::ofstream log;
  const auto& cfg = trainer.config();
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    write_file_bytes(opt.out_dir / "config.ini", serialize_config(cfg));
    log.open(opt.out_dir / "train_log.jsonl", opt.resume_from.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("cannot open training log in " + opt.out_dir.string());
  }
  while (!trainer.done()) {
    LossRecord rec;
    try {
      rec = trainer.train_step();
    } catch (const DivergenceError&) {
      if (log) log << R"({"event":"divergence","step":)" << trainer.step() << "}\n";
      throw;
    }
    if (log) log << rec.to_json_line();
    if (opt.on_step) opt.on_step(rec);
    if (!opt.out_dir.empty() && cfg.checkpoint_every > 0 && trainer.step() % cfg.checkpoint_every == 0 && !trainer.done())
      save_checkpoint(opt.out_dir / ("checkpoint_" + std::to_string(trainer.step()) + ".bin"), trainer.checkpoint());
  }
  if (!opt.out_dir.empty()) save_checkpoint(opt.out_dir / "checkpoint.bin", trainer.checkpoint());
}

/// Applies a network to a whole image (fully convolutional, reflection padded).
template <typename T, template <typename> class Net>
Image apply_network(const Net<T>& net, const Image& img) {
  Image out = image_at<double>(net.forward(to_tensor<T>(img)), 0);
  clamp01(out);
  return out;
}

/// Copies weight values across precisions (no optimizer state); names and shapes must match.
template <typename U, typename T>
void cast_parameters(ParameterSet<U>& dst, const ParameterSet<T>& src) {
  if (dst.size() != src.size()) throw DataError("checkpoint does not match the network spec (array count)");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].shape != src[i].shape)
      throw DataError("checkpoint does not match the network spec at '" + dst[i].name + "'");
    dst[i].value.assign(src[i].value.begin(), src[i].value.end());
  }
}

/// Rebuilds the DSGAN generator of a checkpoint (spec from its config echo).
/// Inference defaults to double precision so that an identity network is
/// bit-exact.
template <typename U = double, typename T>
DsganGenerator<U> load_dsgan_generator(const Checkpoint<T>& c) {
  if (c.kind != "dsgan") throw DataError("expected a dsgan checkpoint, got '" + c.kind + "'");
  DsganGenerator<U> g(parse_config(c.config).generator, 0);
  cast_parameters(g.params(), c.set("generator"));
  return g;
}

template <typename U = double, typename T>
SRGenerator<U> load_sr_generator(const Checkpoint<T>& c) {
  if (c.kind != "sr") throw DataError("expected an sr checkpoint, got '" + c.kind + "'");
  SRGenerator<U> g(parse_config(c.config).sr_generator, 0);
  cast_parameters(g.params(), c.set("generator"));
  return g;
}

}  // namespace realsr

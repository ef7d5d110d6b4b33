#include "coarse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"
#include "coarse/nn/adam.hpp"

namespace coarse {

using nn::Tensor;
using nn::Var;

std::string mix_role_name(MixRole r) {
  switch (r) {
    case MixRole::kCoarseId: return "coarse_id";
    case MixRole::kDenseOod: return "dense_ood";
    case MixRole::kPseudo: return "pseudo";
  }
  fail("unknown mix role");
}

MixRole mix_role_from_name(const std::string& name) {
  if (name == "coarse_id") return MixRole::kCoarseId;
  if (name == "dense_ood") return MixRole::kDenseOod;
  if (name == "pseudo") return MixRole::kPseudo;
  fail("unknown mix role '", name, "'");
}

std::string weight_mode_name(WeightMode m) {
  return m == WeightMode::kUniform ? "uniform" : "inverse_frequency";
}

WeightMode weight_mode_from_name(const std::string& name) {
  if (name == "uniform") return WeightMode::kUniform;
  if (name == "inverse_frequency") return WeightMode::kInverseFrequency;
  fail("unknown weight mode '", name, "'");
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "train config: learning rate must be positive");
  require(epochs >= 1, "train config: epochs must be >= 1");
  require(crop_phase_fraction > 0.0 && crop_phase_fraction < 1.0,
          "train config: crop phase fraction must be in (0, 1)");
  require(crop_h > 0 && crop_w > 0 && full_h > 0 && full_w > 0,
          "train config: bad resolutions");
  require(batch_size >= 1, "train config: batch size must be >= 1");
  require(scale_min > 0.0 && scale_max >= scale_min, "train config: bad scale range");
  require(!data_mix.empty(), "train config: data mix is empty");
}

std::string TrainHistory::to_table() const {
  std::string out = "epoch\tphase\tloss\tval_miou\n";
  char buf[96];
  for (const EpochRecord& e : epochs) {
    if (e.has_val)
      std::snprintf(buf, sizeof(buf), "%d\t%s\t%.6f\t%.4f\n", e.epoch,
                    e.phase.c_str(), e.mean_loss, e.val_miou);
    else
      std::snprintf(buf, sizeof(buf), "%d\t%s\t%.6f\t-\n", e.epoch, e.phase.c_str(),
                    e.mean_loss);
    out += buf;
  }
  return out;
}

std::vector<double> class_weights(const ClassFrequencyTable& freq, WeightMode mode) {
  const size_t c = freq.fractions.size();
  std::vector<double> w(c, 1.0);
  if (mode == WeightMode::kUniform) return w;
  double sum = 0.0;
  for (size_t i = 0; i < c; ++i) {
    w[i] = 1.0 / std::max(freq.fractions[i], 1e-3);
    sum += w[i];
  }
  for (double& v : w) v *= double(c) / sum;
  return w;
}

double weighted_ce_loss_value(const Tensor& logits, const LabelMask& target,
                              const std::vector<double>& weights) {
  Var l = nn::constant(logits);
  Var loss = nn::weighted_ce_loss(l, target.data, target.height, target.width,
                                  target.taxonomy.ignore_index(), weights);
  return loss->value.data[0];
}

namespace {

ImageU8 resize_image(const ImageU8& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  Tensor t = image_to_tensor(img);
  Tensor r = nn::bilinear_resize_value(t, out_h, out_w);
  ImageU8 out(out_h, out_w, 3);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) =
            uint8_t(std::lround(std::clamp(r.at3(c, y, x), 0.0, 1.0) * 255.0));
  return out;
}

LabelMask resize_mask_nearest(const LabelMask& mask, int out_h, int out_w) {
  if (mask.height == out_h && mask.width == out_w) return mask;
  LabelMask out(out_h, out_w, mask.taxonomy, mask.provenance);
  for (int y = 0; y < out_h; ++y) {
    int sy = std::clamp(int((y + 0.5) * double(mask.height) / out_h), 0,
                        mask.height - 1);
    for (int x = 0; x < out_w; ++x) {
      int sx = std::clamp(int((x + 0.5) * double(mask.width) / out_w), 0,
                          mask.width - 1);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

ImageU8 pad_image_reflect(const ImageU8& img, int out_h, int out_w) {
  if (img.height >= out_h && img.width >= out_w) return img;
  int ph = std::max(img.height, out_h), pw = std::max(img.width, out_w);
  require(ph - img.height < img.height && pw - img.width < img.width,
          "augment: image too small to reflect-pad to ", pw, "x", ph);
  ImageU8 out(ph, pw, 3);
  for (int y = 0; y < ph; ++y) {
    int sy = y < img.height ? y : 2 * img.height - 2 - y;
    for (int x = 0; x < pw; ++x) {
      int sx = x < img.width ? x : 2 * img.width - 2 - x;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

LabelMask pad_mask_ignore(const LabelMask& mask, int out_h, int out_w) {
  if (mask.height >= out_h && mask.width >= out_w) return mask;
  int ph = std::max(mask.height, out_h), pw = std::max(mask.width, out_w);
  LabelMask out(ph, pw, mask.taxonomy, mask.provenance);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, x);
  return out;
}

}  // namespace

CropResult random_resize_crop(const ImageU8& image, const LabelMask& mask, int out_h,
                              int out_w, Rng& rng, double scale_min,
                              double scale_max) {
  require(image.height == mask.height && image.width == mask.width,
          "random_resize_crop: image/mask shape mismatch");
  double scale = 1.0;
  int rh = 0, rw = 0;
  constexpr int kRetries = 10;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    scale = rng.uniform(scale_min, scale_max);
    rh = std::max(1, int(std::floor(image.height * scale)));
    rw = std::max(1, int(std::floor(image.width * scale)));
    if (rh >= out_h && rw >= out_w) break;
  }
  ImageU8 rimg = resize_image(image, rh, rw);
  LabelMask rmask = resize_mask_nearest(mask, rh, rw);
  if (rh < out_h || rw < out_w) {
    rimg = pad_image_reflect(rimg, out_h, out_w);
    rmask = pad_mask_ignore(rmask, out_h, out_w);
    rh = rimg.height;
    rw = rimg.width;
  }
  int oy = rh > out_h ? int(rng.uniform_int(0, rh - out_h)) : 0;
  int ox = rw > out_w ? int(rng.uniform_int(0, rw - out_w)) : 0;
  CropResult out{ImageU8(out_h, out_w, 3),
                 LabelMask(out_h, out_w, mask.taxonomy, mask.provenance)};
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = rimg.at(oy + y, ox + x, c);
      out.mask.at(y, x) = rmask.at(oy + y, ox + x);
    }
  }
  return out;
}

namespace {

struct TrainSample {
  ImageU8 image;
  LabelMask mask;
};

// Nearest (center-rule) downsample of targets for patch-level supervision.
LabelMask downsample_target(const LabelMask& mask, int factor) {
  const int gh = mask.height / factor, gw = mask.width / factor;
  LabelMask out(gh, gw, mask.taxonomy, mask.provenance);
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x)
      out.at(y, x) = mask.at(y * factor + factor / 2, x * factor + factor / 2);
  return out;
}

ClassFrequencyTable mix_frequencies(const std::vector<TrainSample>& samples,
                                    int num_classes, int ignore) {
  std::vector<uint64_t> counts(num_classes, 0);
  uint64_t total = 0;
  for (const TrainSample& s : samples) {
    for (uint8_t v : s.mask.data) {
      if (v == ignore) continue;
      ++counts[v];
      ++total;
    }
  }
  require(total > 0, "train: no labeled pixels in the data mix");
  ClassFrequencyTable t;
  t.labeled_pixels = total;
  t.fractions.resize(counts.size());
  for (size_t i = 0; i < counts.size(); ++i)
    t.fractions[i] = double(counts[i]) / double(total);
  return t;
}

}  // namespace

TrainHistory train(SegModel& model, const TrainConfig& cfg) {
  cfg.validate();
  const ClassTaxonomy& taxonomy = model.taxonomy();

  // Concatenate labeled train samples across the mix and keep them decoded;
  // the mixing rule is uniform shuffling, no re-weighting.
  std::vector<TrainSample> samples;
  for (const DataMixEntry& entry : cfg.data_mix) {
    require(entry.manifest.taxonomy.num_classes() == taxonomy.num_classes(),
            "train: data mix taxonomy differs from model taxonomy");
    for (const ImageSample& s : entry.manifest.samples) {
      if (s.split != Split::kTrain || !s.labeled) continue;
      TrainSample ts{read_png(s.image_path),
                     load_label_png(s.label_path, taxonomy).mask};
      require(ts.image.height == ts.mask.height && ts.image.width == ts.mask.width,
              "train: image/label shape mismatch for '", s.image_path, "'");
      samples.push_back(std::move(ts));
    }
  }
  require(!samples.empty(), "train: data mix contains no labeled train samples");

  std::vector<double> weights(size_t(taxonomy.num_classes()), 1.0);
  if (cfg.weight_mode == WeightMode::kInverseFrequency)
    weights = class_weights(
        mix_frequencies(samples, taxonomy.num_classes(), taxonomy.ignore_index()),
        cfg.weight_mode);

  nn::Adam optimizer(model.decoder_parameters(), cfg.learning_rate);
  const int crop_epochs = int(std::llround(cfg.epochs * cfg.crop_phase_fraction));
  const int pad_multiple = model.pad_multiple();

  TrainHistory history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool crop_phase = epoch < crop_epochs;
    Rng rng(Rng::derive(cfg.seed, uint64_t(epoch)));

    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(rng.uniform_int(0, int64_t(i) - 1))]);

    double loss_sum = 0.0;
    size_t batch_fill = 0;
    optimizer.zero_grad();
    for (size_t si = 0; si < order.size(); ++si) {
      const TrainSample& s = samples[order[si]];
      ImageU8 img;
      LabelMask msk(1, 1, taxonomy);
      if (crop_phase) {
        CropResult c = random_resize_crop(s.image, s.mask, cfg.crop_h, cfg.crop_w,
                                          rng, cfg.scale_min, cfg.scale_max);
        img = std::move(c.image);
        msk = std::move(c.mask);
      } else {
        img = resize_image(s.image, cfg.full_h, cfg.full_w);
        msk = resize_mask_nearest(s.mask, cfg.full_h, cfg.full_w);
      }

      Tensor input = image_to_tensor(img);
      Tensor padded = pad_reflect_to_multiple(input, pad_multiple);
      LabelMask padded_mask = pad_mask_ignore(msk, padded.dim(1), padded.dim(2));

      EncoderOutput enc = model.encoder().encode(padded);
      int scale = 1;
      Var logits = model.forward_logits(enc, padded, &scale);
      Var loss;
      if (model.kind() == DecoderKind::kPixel) {
        Var full = nn::bilinear_resize(logits, padded.dim(1), padded.dim(2));
        loss = nn::weighted_ce_loss(full, padded_mask.data, padded_mask.height,
                                    padded_mask.width, taxonomy.ignore_index(),
                                    weights);
      } else {
        LabelMask small = downsample_target(padded_mask, scale);
        loss = nn::weighted_ce_loss(logits, small.data, small.height, small.width,
                                    taxonomy.ignore_index(), weights);
      }
      double loss_v = loss->value.data[0];
      require(std::isfinite(loss_v), "train: non-finite loss at epoch ", epoch);
      loss_sum += loss_v;
      nn::backward(loss);
      ++batch_fill;

      if (batch_fill == size_t(cfg.batch_size) || si + 1 == order.size()) {
        double inv = 1.0 / double(batch_fill);
        for (const Var& p : optimizer.params())
          if (!p->grad.data.empty())
            for (double& g : p->grad.data) g *= inv;
        optimizer.step();
        optimizer.zero_grad();
        batch_fill = 0;
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.phase = crop_phase ? "crop" : "full";
    record.mean_loss = loss_sum / double(order.size());
    if (cfg.eval_interval > 0 && cfg.val_manifest.has_value() &&
        ((epoch + 1) % cfg.eval_interval == 0 || epoch + 1 == cfg.epochs)) {
      record.has_val = true;
      record.val_miou = evaluate(model, *cfg.val_manifest).miou;
    }
    history.epochs.push_back(std::move(record));
  }
  return history;
}

MiouReport evaluate(const SegModel& model, const DatasetManifest& manifest,
                    Split split) {
  ConfusionMatrix total(model.taxonomy().num_classes());
  size_t evaluated = 0;
  for (const ImageSample& s : manifest.samples) {
    if (s.split != split || !s.labeled) continue;
    ImageU8 img = read_png(s.image_path);
    LabelMask gt = load_label_png(s.label_path, model.taxonomy()).mask;
    LabelMask pred = model.predict(img);
    total += confusion(pred, gt);
    ++evaluated;
  }
  require(evaluated > 0, "evaluate: no labeled samples in split '",
          split_name(split), "' of '", manifest.name, "'");
  return miou(total);
}

}  // namespace coarse

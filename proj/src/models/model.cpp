#include "coarse/models/model.hpp"

#include <cmath>

#include "coarse/error.hpp"

namespace coarse {

using nn::Tensor;
using nn::Var;

std::string decoder_kind_name(DecoderKind k) {
  return k == DecoderKind::kPixel ? "pixel" : "patch";
}

DecoderKind decoder_kind_from_name(const std::string& name) {
  if (name == "pixel") return DecoderKind::kPixel;
  if (name == "patch") return DecoderKind::kPatch;
  fail("unknown decoder kind '", name, "' (expected 'pixel' or 'patch')");
}

SegModel::SegModel(std::shared_ptr<ViTEncoder> encoder, DecoderKind kind,
                   ClassTaxonomy taxonomy, uint64_t decoder_seed)
    : encoder_(std::move(encoder)), kind_(kind), taxonomy_(std::move(taxonomy)) {
  require(encoder_ != nullptr, "seg model: null encoder");
  if (kind_ == DecoderKind::kPixel) {
    PixelDecoderConfig cfg;
    cfg.encoder_dim = encoder_->dim();
    cfg.num_classes = taxonomy_.num_classes();
    cfg.seed = decoder_seed;
    pixel_ = std::make_shared<PixelDecoder>(cfg);
  } else {
    PatchDecoderConfig cfg =
        default_patch_config(encoder_->dim(), taxonomy_.num_classes(), decoder_seed);
    patch_ = std::make_shared<PatchDecoder>(cfg);
  }
}

SegModel::SegModel(std::shared_ptr<ViTEncoder> encoder,
                   std::shared_ptr<PixelDecoder> pixel, ClassTaxonomy taxonomy)
    : encoder_(std::move(encoder)), kind_(DecoderKind::kPixel),
      pixel_(std::move(pixel)), taxonomy_(std::move(taxonomy)) {
  require(encoder_ && pixel_, "seg model: null component");
  require(pixel_->config().num_classes == taxonomy_.num_classes(),
          "seg model: decoder class count != taxonomy");
}

SegModel::SegModel(std::shared_ptr<ViTEncoder> encoder,
                   std::shared_ptr<PatchDecoder> patch, ClassTaxonomy taxonomy)
    : encoder_(std::move(encoder)), kind_(DecoderKind::kPatch),
      patch_(std::move(patch)), taxonomy_(std::move(taxonomy)) {
  require(encoder_ && patch_, "seg model: null component");
  require(patch_->config().num_classes == taxonomy_.num_classes(),
          "seg model: decoder class count != taxonomy");
}

int SegModel::pad_multiple() const {
  // Pixel decoders need 4 | H as well as P | H; 4P covers both. Patch
  // decoders only need P, but a uniform rule keeps shapes predictable.
  return 4 * encoder_->patch_size();
}

std::vector<Var> SegModel::decoder_parameters() const {
  return kind_ == DecoderKind::kPixel ? pixel_->parameters() : patch_->parameters();
}

NamedTensors SegModel::named_weights() const {
  NamedTensors out = encoder_->named_weights();
  NamedTensors dec = kind_ == DecoderKind::kPixel ? pixel_->named_weights()
                                                  : patch_->named_weights();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

std::string SegModel::arch_canonical() const {
  std::string dec = kind_ == DecoderKind::kPixel ? pixel_->config().canonical()
                                                 : patch_->config().canonical();
  return strcat_msg(encoder_->config().canonical(), "+", dec, "+classes=",
                    taxonomy_.num_classes());
}

Var SegModel::forward_logits(const EncoderOutput& enc, const Tensor& padded_image,
                             int* scale_out) const {
  if (kind_ == DecoderKind::kPixel) {
    if (scale_out) *scale_out = 4;
    return pixel_->forward(enc, padded_image);
  }
  if (scale_out) *scale_out = encoder_->patch_size();
  return patch_->forward(enc);
}

LogitMap SegModel::infer_logits(const ImageU8& image) const {
  Tensor input = image_to_tensor(image);
  Tensor padded = pad_reflect_to_multiple(input, pad_multiple());
  EncoderOutput enc = encoder_->encode(padded);
  int scale = 1;
  Var logits = forward_logits(enc, padded, &scale);

  // Crop padding back off in grid units (padding is always bottom/right and
  // the pad multiple is divisible by the scale).
  const int gh = image.height / scale + (image.height % scale ? 1 : 0);
  const int gw = image.width / scale + (image.width % scale ? 1 : 0);
  const int c = logits->value.dim(0);
  LogitMap out;
  out.scale = scale;
  out.grid = Tensor({c, gh, gw});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) out.grid.at3(k, y, x) = logits->value.at3(k, y, x);
  return out;
}

LabelMask SegModel::predict(const ImageU8& image) const {
  LogitMap logits = infer_logits(image);
  return logits_to_mask(logits, image.height, image.width, taxonomy_, kind_);
}

LabelMask logits_to_mask(const LogitMap& logits, int out_h, int out_w,
                         const ClassTaxonomy& taxonomy, DecoderKind kind) {
  require(logits.num_classes() == taxonomy.num_classes(),
          "logits_to_mask: class count mismatch");
  LabelMask mask(out_h, out_w, taxonomy,
                 kind == DecoderKind::kPixel ? Provenance::kDense : Provenance::kDense);
  const int c = logits.num_classes();
  if (kind == DecoderKind::kPixel) {
    // Bilinear upsample of the logits, then per-pixel argmax.
    Tensor up = nn::bilinear_resize_value(
        logits.grid, logits.grid.dim(1) * logits.scale, logits.grid.dim(2) * logits.scale);
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        int best = 0;
        double best_v = up.at3(0, y, x);
        for (int k = 1; k < c; ++k) {
          double v = up.at3(k, y, x);
          if (v > best_v) {
            best_v = v;
            best = k;
          }
        }
        mask.at(y, x) = uint8_t(best);
      }
    }
  } else {
    // Argmax at patch resolution, nearest-upsampled on labels.
    const int gh = logits.grid.dim(1), gw = logits.grid.dim(2);
    std::vector<uint8_t> patch_label(size_t(gh) * gw);
    for (int y = 0; y < gh; ++y) {
      for (int x = 0; x < gw; ++x) {
        int best = 0;
        double best_v = logits.grid.at3(0, y, x);
        for (int k = 1; k < c; ++k) {
          double v = logits.grid.at3(k, y, x);
          if (v > best_v) {
            best_v = v;
            best = k;
          }
        }
        patch_label[size_t(y) * gw + x] = uint8_t(best);
      }
    }
    for (int y = 0; y < out_h; ++y) {
      int gy = std::min(y / logits.scale, gh - 1);
      for (int x = 0; x < out_w; ++x) {
        int gx = std::min(x / logits.scale, gw - 1);
        mask.at(y, x) = patch_label[size_t(gy) * gw + gx];
      }
    }
  }
  return mask;
}

}  // namespace coarse

#pragma once

#include <memory>

#include "coarse/mask.hpp"
#include "coarse/models/patch_decoder.hpp"
#include "coarse/models/pixel_decoder.hpp"

namespace coarse {

enum class DecoderKind { kPixel, kPatch };

std::string decoder_kind_name(DecoderKind k);
DecoderKind decoder_kind_from_name(const std::string& name);

// H'×W'×C class-score raster plus its scale relative to the source image.
struct LogitMap {
  nn::Tensor grid;  // [C, H', W']
  int scale = 1;    // H / H'
  int num_classes() const { return grid.dim(0); }
};

// Frozen encoder plus one trainable decoder, bound to a taxonomy.
class SegModel {
public:
  SegModel(std::shared_ptr<ViTEncoder> encoder, DecoderKind kind,
           ClassTaxonomy taxonomy, uint64_t decoder_seed);
  // Wraps already-built decoders (checkpoint loading, tests).
  SegModel(std::shared_ptr<ViTEncoder> encoder, std::shared_ptr<PixelDecoder> pixel,
           ClassTaxonomy taxonomy);
  SegModel(std::shared_ptr<ViTEncoder> encoder, std::shared_ptr<PatchDecoder> patch,
           ClassTaxonomy taxonomy);

  DecoderKind kind() const { return kind_; }
  const ClassTaxonomy& taxonomy() const { return taxonomy_; }
  const ViTEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<ViTEncoder> encoder_ptr() const { return encoder_; }
  const PixelDecoder* pixel_decoder() const { return pixel_.get(); }
  const PatchDecoder* patch_decoder() const { return patch_.get(); }

  std::vector<nn::Var> decoder_parameters() const;
  NamedTensors named_weights() const;  // encoder + decoder
  std::string arch_canonical() const;

  // Inputs are reflect-padded bottom/right to multiples of this before the
  // encoder runs; targets must be padded (with ignore) the same way.
  int pad_multiple() const;

  // Differentiable logits on a padded input tensor. Pixel decoders yield
  // scale 4, patch decoders scale P.
  nn::Var forward_logits(const EncoderOutput& enc, const nn::Tensor& padded_image,
                         int* scale_out = nullptr) const;

  // Inference-only logits at the decoder's native scale, cropped back to the
  // unpadded frame (in grid units).
  LogitMap infer_logits(const ImageU8& image) const;

  // Full-resolution argmax prediction (bilinear on logits for pixel decoders,
  // nearest on labels for patch decoders).
  LabelMask predict(const ImageU8& image) const;

private:
  std::shared_ptr<ViTEncoder> encoder_;
  DecoderKind kind_;
  std::shared_ptr<PixelDecoder> pixel_;
  std::shared_ptr<PatchDecoder> patch_;
  ClassTaxonomy taxonomy_;
};

// Argmax prediction with the stated upsampling conventions; exposed for tests
// that build logit grids by hand.
LabelMask logits_to_mask(const LogitMap& logits, int out_h, int out_w,
                         const ClassTaxonomy& taxonomy, DecoderKind kind);

}  // namespace coarse

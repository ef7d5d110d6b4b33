#pragma once

#include <array>

#include "coarse/models/encoder.hpp"
#include "coarse/models/layers.hpp"

namespace coarse {

// CNN decoder fusing multi-layer encoder features with shallow image features
// at 1/4 input resolution. Defaults follow the published channel plan; widths
// stay configurable so tests can instantiate narrow variants.
struct PixelDecoderConfig {
  int encoder_dim = 384;
  int num_classes = 9;
  std::array<int, 4> proj_channels = {64, 128, 192, 256};
  int fused_channels = 128;        // Fuser output
  int compressed_channels = 64;    // Compressor output
  std::vector<int> skip_kernels = {3, 5, 7, 9, 11};
  int skip_branch_channels = 9;    // per ImgSkip branch
  int skip_fused_channels = 64;    // ImgSkip fuser output, both convs
  int late_kernel = 5;             // first LateFusion kernel; the next two are 3x3
  int late_channels = 64;
  uint64_t seed = 7;

  void validate() const;
  std::string canonical() const;
};

class PixelDecoder {
public:
  explicit PixelDecoder(PixelDecoderConfig cfg);

  // enc grids and image must come from the same padded input; H, W must be
  // multiples of 4 and of the encoder patch size. Returns logits
  // [num_classes, H/4, W/4].
  nn::Var forward(const EncoderOutput& enc, const nn::Tensor& image) const;

  const PixelDecoderConfig& config() const { return cfg_; }
  std::vector<nn::Var> parameters() const;
  NamedTensors named_weights() const;
  int64_t parameter_count() const;

private:
  PixelDecoderConfig cfg_;
  struct ConvUnit {
    Conv2dLayer conv;
    GroupNormLayer norm;
  };
  std::array<ConvUnit, 4> layer_proj_;
  ConvUnit fuser_;
  ConvUnit compressor_;
  std::vector<ConvUnit> skip_branches_;
  ConvUnit skip_fuse1_, skip_fuse2_;
  ConvUnit late1_, late2_, late3_;
  Conv2dLayer classifier_;

  nn::Var apply_unit(const ConvUnit& unit, const nn::Var& x) const;
};

}  // namespace coarse

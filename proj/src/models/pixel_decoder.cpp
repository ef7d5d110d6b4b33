#include "coarse/models/pixel_decoder.hpp"

#include "coarse/error.hpp"

namespace coarse {

using nn::Var;

void PixelDecoderConfig::validate() const {
  require(encoder_dim >= 1 && num_classes >= 2, "pixel decoder: bad dims");
  for (int c : proj_channels) require(c >= 1, "pixel decoder: bad projection width");
  require(!skip_kernels.empty(), "pixel decoder: no skip kernels");
  for (int k : skip_kernels)
    require(k >= 1 && k % 2 == 1, "pixel decoder: skip kernels must be odd");
  require(fused_channels >= 1 && compressed_channels >= 1 &&
              skip_branch_channels >= 1 && skip_fused_channels >= 1 &&
              late_channels >= 1 && late_kernel % 2 == 1,
          "pixel decoder: bad channel plan");
}

std::string PixelDecoderConfig::canonical() const {
  std::string kernels;
  for (int k : skip_kernels) kernels += strcat_msg(k, ",");
  return strcat_msg("pixel(d=", encoder_dim, ",C=", num_classes, ",proj=",
                    proj_channels[0], "-", proj_channels[1], "-", proj_channels[2],
                    "-", proj_channels[3], ",fuse=", fused_channels, ",comp=",
                    compressed_channels, ",skip=[", kernels, "]x",
                    skip_branch_channels, ",sf=", skip_fused_channels, ",late=",
                    late_channels, "k", late_kernel, ")");
}

PixelDecoder::PixelDecoder(PixelDecoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const bool train = true;

  int proj_total = 0;
  for (size_t i = 0; i < 4; ++i) {
    layer_proj_[i].conv = Conv2dLayer::init(rng, cfg_.encoder_dim,
                                            cfg_.proj_channels[i], 1, 1, 0, train);
    layer_proj_[i].norm = GroupNormLayer::init(cfg_.proj_channels[i], train);
    proj_total += cfg_.proj_channels[i];
  }
  fuser_.conv = Conv2dLayer::init(rng, proj_total, cfg_.fused_channels, 1, 1, 0, train);
  fuser_.norm = GroupNormLayer::init(cfg_.fused_channels, train);
  compressor_.conv = Conv2dLayer::init(rng, cfg_.fused_channels,
                                       cfg_.compressed_channels, 1, 1, 0, train);
  compressor_.norm = GroupNormLayer::init(cfg_.compressed_channels, train);

  for (int k : cfg_.skip_kernels) {
    ConvUnit unit;
    unit.conv = Conv2dLayer::init(rng, 3, cfg_.skip_branch_channels, k, 1, k / 2, train);
    unit.norm = GroupNormLayer::init(cfg_.skip_branch_channels, train);
    skip_branches_.push_back(std::move(unit));
  }
  const int skip_concat = cfg_.skip_branch_channels * int(cfg_.skip_kernels.size());
  skip_fuse1_.conv =
      Conv2dLayer::init(rng, skip_concat, cfg_.skip_fused_channels, 3, 2, 1, train);
  skip_fuse1_.norm = GroupNormLayer::init(cfg_.skip_fused_channels, train);
  skip_fuse2_.conv = Conv2dLayer::init(rng, cfg_.skip_fused_channels,
                                       cfg_.skip_fused_channels, 3, 2, 1, train);
  skip_fuse2_.norm = GroupNormLayer::init(cfg_.skip_fused_channels, train);

  const int late_in = cfg_.compressed_channels + cfg_.skip_fused_channels;
  late1_.conv = Conv2dLayer::init(rng, late_in, cfg_.late_channels, cfg_.late_kernel,
                                  1, cfg_.late_kernel / 2, train);
  late1_.norm = GroupNormLayer::init(cfg_.late_channels, train);
  late2_.conv = Conv2dLayer::init(rng, cfg_.late_channels, cfg_.late_channels, 3, 1, 1,
                                  train);
  late2_.norm = GroupNormLayer::init(cfg_.late_channels, train);
  late3_.conv = Conv2dLayer::init(rng, cfg_.late_channels, cfg_.late_channels, 3, 1, 1,
                                  train);
  late3_.norm = GroupNormLayer::init(cfg_.late_channels, train);
  classifier_ = Conv2dLayer::init(rng, cfg_.late_channels, cfg_.num_classes, 1, 1, 0,
                                  train);
}

Var PixelDecoder::apply_unit(const ConvUnit& unit, const Var& x) const {
  return nn::gelu(unit.norm.apply(unit.conv.apply(x)));
}

Var PixelDecoder::forward(const EncoderOutput& enc, const nn::Tensor& image) const {
  require(enc.layer_features.size() == 4, "pixel decoder: expected 4 feature grids");
  require(enc.dim() == cfg_.encoder_dim, "pixel decoder: encoder dim ", enc.dim(),
          " != configured ", cfg_.encoder_dim);
  const int h = image.dim(1), w = image.dim(2);
  require(h % 4 == 0 && w % 4 == 0, "pixel decoder: input ", w, "x", h,
          " not a multiple of 4");
  require(enc.grid_h() * enc.patch_size == h && enc.grid_w() * enc.patch_size == w,
          "pixel decoder: feature grids do not match the image");
  const int qh = h / 4, qw = w / 4;

  // Multi-layer neck: project, normalize, resample each tapped grid to 1/4.
  std::vector<Var> neck_parts;
  neck_parts.reserve(4);
  for (size_t i = 0; i < 4; ++i) {
    Var g = nn::constant(enc.layer_features[i]);
    Var projected = apply_unit(layer_proj_[i], g);
    neck_parts.push_back(nn::bilinear_resize(projected, qh, qw));
  }
  Var neck = apply_unit(compressor_, apply_unit(fuser_, nn::concat_channels(neck_parts)));

  // ImgSkip: parallel wide-kernel convs on the raw image, fused and brought
  // to 1/4 resolution by two stride-2 convs.
  Var img = nn::constant(image);
  std::vector<Var> branches;
  branches.reserve(skip_branches_.size());
  for (const ConvUnit& unit : skip_branches_)
    branches.push_back(apply_unit(unit, img));
  Var skip = apply_unit(skip_fuse2_,
                        apply_unit(skip_fuse1_, nn::concat_channels(branches)));

  Var fused = nn::concat_channels({neck, skip});
  Var late = apply_unit(late3_, apply_unit(late2_, apply_unit(late1_, fused)));
  return classifier_.apply(late);
}

NamedTensors PixelDecoder::named_weights() const {
  NamedTensors out;
  for (size_t i = 0; i < 4; ++i) {
    layer_proj_[i].conv.collect(strcat_msg("pixel.proj", i, ".conv"), out);
    layer_proj_[i].norm.collect(strcat_msg("pixel.proj", i, ".norm"), out);
  }
  fuser_.conv.collect("pixel.fuser.conv", out);
  fuser_.norm.collect("pixel.fuser.norm", out);
  compressor_.conv.collect("pixel.compressor.conv", out);
  compressor_.norm.collect("pixel.compressor.norm", out);
  for (size_t i = 0; i < skip_branches_.size(); ++i) {
    skip_branches_[i].conv.collect(strcat_msg("pixel.skip", i, ".conv"), out);
    skip_branches_[i].norm.collect(strcat_msg("pixel.skip", i, ".norm"), out);
  }
  skip_fuse1_.conv.collect("pixel.skip_fuse1.conv", out);
  skip_fuse1_.norm.collect("pixel.skip_fuse1.norm", out);
  skip_fuse2_.conv.collect("pixel.skip_fuse2.conv", out);
  skip_fuse2_.norm.collect("pixel.skip_fuse2.norm", out);
  late1_.conv.collect("pixel.late1.conv", out);
  late1_.norm.collect("pixel.late1.norm", out);
  late2_.conv.collect("pixel.late2.conv", out);
  late2_.norm.collect("pixel.late2.norm", out);
  late3_.conv.collect("pixel.late3.conv", out);
  late3_.norm.collect("pixel.late3.norm", out);
  classifier_.collect("pixel.classifier", out);
  return out;
}

std::vector<Var> PixelDecoder::parameters() const {
  std::vector<Var> params;
  for (auto& [name, var] : named_weights()) params.push_back(var);
  return params;
}

int64_t PixelDecoder::parameter_count() const {
  int64_t n = 0;
  for (const Var& p : parameters()) n += p->value.numel();
  return n;
}

}  // namespace coarse

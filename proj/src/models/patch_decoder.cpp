#include "coarse/models/patch_decoder.hpp"

#include <cmath>

#include "coarse/error.hpp"

namespace coarse {

using nn::Var;

void PatchDecoderConfig::validate() const {
  require(encoder_dim >= 1 && num_classes >= 2, "patch decoder: bad dims");
  require(depth >= 1, "patch decoder: depth must be >= 1");
  require(heads >= 1 && encoder_dim % heads == 0, "patch decoder: dim ",
          encoder_dim, " not divisible by heads ", heads);
  require(mlp_ratio >= 1, "patch decoder: bad mlp ratio");
}

std::string PatchDecoderConfig::canonical() const {
  return strcat_msg("patch(d=", encoder_dim, ",C=", num_classes, ",L=", depth,
                    ",h=", heads, ",m=", mlp_ratio, ")");
}

PatchDecoderConfig default_patch_config(int encoder_dim, int num_classes,
                                        uint64_t seed) {
  PatchDecoderConfig cfg;
  cfg.encoder_dim = encoder_dim;
  cfg.num_classes = num_classes;
  cfg.heads = pick_head_count(encoder_dim);
  cfg.seed = seed;
  return cfg;
}

PatchDecoder::PatchDecoder(PatchDecoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  nn::Tensor cls({cfg_.num_classes, cfg_.encoder_dim});
  for (double& v : cls.data) v = rng.normal(0.0, 0.02);
  class_tokens_ = nn::param(std::move(cls));
  for (int i = 0; i < cfg_.depth; ++i)
    blocks_.push_back(TransformerBlock::init(rng, cfg_.encoder_dim, cfg_.heads,
                                             cfg_.mlp_ratio, /*trainable=*/true));
  final_norm_ = LayerNormLayer::init(cfg_.encoder_dim, /*trainable=*/true);
}

Var PatchDecoder::forward(const EncoderOutput& enc) const {
  require(enc.dim() == cfg_.encoder_dim, "patch decoder: encoder dim ", enc.dim(),
          " != configured ", cfg_.encoder_dim);
  const int d = cfg_.encoder_dim, c = cfg_.num_classes;
  const int hp = enc.grid_h(), wp = enc.grid_w();
  const int n = hp * wp;

  // Final tapped grid -> token rows.
  const nn::Tensor& grid = enc.layer_features.back();
  nn::Tensor tokens({n, d});
  for (int y = 0; y < hp; ++y)
    for (int x = 0; x < wp; ++x)
      for (int k = 0; k < d; ++k) tokens.at2(y * wp + x, k) = grid.at3(k, y, x);

  Var x = nn::concat_rows({nn::constant(std::move(tokens)), class_tokens_});
  for (const TransformerBlock& block : blocks_) x = block.forward(x);
  x = final_norm_.apply(x);

  Var patches = nn::slice_rows(x, 0, n);            // [n, d]
  Var classes = nn::slice_rows(x, n, n + c);        // [C, d]
  Var scores = nn::scale(nn::matmul(patches, nn::transpose(classes)),
                         1.0 / std::sqrt(double(d)));  // [n, C]
  return nn::reshape(nn::transpose(scores), {c, hp, wp});
}

NamedTensors PatchDecoder::named_weights() const {
  NamedTensors out;
  out.emplace_back("patch.class_tokens", class_tokens_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(strcat_msg("patch.block", i), out);
  final_norm_.collect("patch.final_norm", out);
  return out;
}

std::vector<Var> PatchDecoder::parameters() const {
  std::vector<Var> params;
  for (auto& [name, var] : named_weights()) params.push_back(var);
  return params;
}

int64_t PatchDecoder::parameter_count() const {
  int64_t n = 0;
  for (const Var& p : parameters()) n += p->value.numel();
  return n;
}

}  // namespace coarse

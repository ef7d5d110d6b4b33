#pragma once

#include "coarse/models/encoder.hpp"
#include "coarse/models/layers.hpp"

namespace coarse {

// Mask-transformer-style decoder: final-layer patch tokens plus one learnable
// token per class run through a short transformer; per-patch class scores are
// scaled dot products between patch and class tokens.
struct PatchDecoderConfig {
  int encoder_dim = 384;
  int num_classes = 9;
  int depth = 2;
  int heads = 6;
  int mlp_ratio = 2;
  uint64_t seed = 11;

  void validate() const;
  std::string canonical() const;
};

PatchDecoderConfig default_patch_config(int encoder_dim, int num_classes,
                                        uint64_t seed = 11);

class PatchDecoder {
public:
  explicit PatchDecoder(PatchDecoderConfig cfg);

  // Returns logits [num_classes, H/P, W/P].
  nn::Var forward(const EncoderOutput& enc) const;

  const PatchDecoderConfig& config() const { return cfg_; }
  std::vector<nn::Var> parameters() const;
  NamedTensors named_weights() const;
  int64_t parameter_count() const;

private:
  PatchDecoderConfig cfg_;
  nn::Var class_tokens_;  // [C, d]
  std::vector<TransformerBlock> blocks_;
  LayerNormLayer final_norm_;
};

}  // namespace coarse

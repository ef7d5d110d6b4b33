#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coarse/io/image.hpp"
#include "coarse/models/layers.hpp"
#include "coarse/nn/tensor.hpp"

namespace coarse {

// Features taken from 4 evenly spaced encoder layers plus the CLS summary.
struct EncoderOutput {
  std::vector<nn::Tensor> layer_features;  // 4 grids, each [d, H/P, W/P]
  nn::Tensor cls;                          // [d]
  int patch_size = 0;

  int grid_h() const { return layer_features.at(0).dim(1); }
  int grid_w() const { return layer_features.at(0).dim(2); }
  int dim() const { return layer_features.at(0).dim(0); }
};

struct ViTConfig {
  int patch_size = 7;
  int dim = 32;
  int depth = 2;
  int heads = 4;
  int mlp_ratio = 4;
  int pos_grid = 16;  // base positional grid, bilinearly resized per input
  uint64_t seed = 1;

  void validate() const;
  std::string canonical() const;  // stable string for hashing
};

// ViT-style frozen feature extractor. The shipped instance is a seeded toy
// network for tests and desk-scale runs; larger pretrained weights load
// through the same container format.
class ViTEncoder {
public:
  explicit ViTEncoder(ViTConfig cfg);

  // image: [3, H, W] in [0,1], H and W multiples of patch_size.
  EncoderOutput encode(const nn::Tensor& image) const;

  int dim() const { return cfg_.dim; }
  int patch_size() const { return cfg_.patch_size; }
  int depth() const { return cfg_.depth; }
  const ViTConfig& config() const { return cfg_; }

  // 1-based encoder layers tapped for the feature grids (depth 12 -> 3,6,9,12).
  static std::vector<int> tap_layers(int depth);

  NamedTensors named_weights() const;

private:
  ViTConfig cfg_;
  LinearLayer patch_embed_;           // [3*P*P, d]
  nn::Var cls_token_;                 // [1, d]
  nn::Var pos_cls_;                   // [1, d]
  nn::Var pos_grid_;                  // [d, pos_grid, pos_grid]
  std::vector<TransformerBlock> blocks_;
  LayerNormLayer final_norm_;
};

// Converts an interleaved RGB image to a [3,H,W] tensor scaled to [0,1].
nn::Tensor image_to_tensor(const ImageU8& img);

// Reflect-pads bottom/right so both sides are multiples of `multiple`.
nn::Tensor pad_reflect_to_multiple(const nn::Tensor& image, int multiple);

}  // namespace coarse

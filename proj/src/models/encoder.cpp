#include "coarse/models/encoder.hpp"

#include <cmath>

#include "coarse/error.hpp"

namespace coarse {

using nn::Tensor;
using nn::Var;

void ViTConfig::validate() const {
  require(patch_size >= 1, "encoder: patch size must be >= 1");
  require(dim >= 1 && depth >= 1, "encoder: dim and depth must be >= 1");
  require(heads >= 1 && dim % heads == 0, "encoder: dim ", dim,
          " not divisible by heads ", heads);
  require(mlp_ratio >= 1 && pos_grid >= 1, "encoder: bad mlp_ratio or pos_grid");
}

std::string ViTConfig::canonical() const {
  return strcat_msg("vit(p=", patch_size, ",d=", dim, ",L=", depth, ",h=", heads,
                    ",m=", mlp_ratio, ",g=", pos_grid, ",seed=", seed, ")");
}

std::vector<int> ViTEncoder::tap_layers(int depth) {
  std::vector<int> taps(4);
  for (int i = 1; i <= 4; ++i)
    taps[i - 1] = (depth * i + 3) / 4;  // ceil(depth * i / 4)
  return taps;
}

ViTEncoder::ViTEncoder(ViTConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const int p = cfg_.patch_size, d = cfg_.dim;
  patch_embed_ = LinearLayer::init(rng, 3 * p * p, d, /*trainable=*/false);
  Tensor cls({1, d});
  for (double& v : cls.data) v = rng.normal(0.0, 0.02);
  cls_token_ = nn::constant(std::move(cls));
  Tensor pcls({1, d});
  for (double& v : pcls.data) v = rng.normal(0.0, 0.02);
  pos_cls_ = nn::constant(std::move(pcls));
  Tensor pg({d, cfg_.pos_grid, cfg_.pos_grid});
  for (double& v : pg.data) v = rng.normal(0.0, 0.02);
  pos_grid_ = nn::constant(std::move(pg));
  for (int i = 0; i < cfg_.depth; ++i)
    blocks_.push_back(TransformerBlock::init(rng, d, cfg_.heads, cfg_.mlp_ratio,
                                             /*trainable=*/false));
  final_norm_ = LayerNormLayer::init(d, /*trainable=*/false);
}

EncoderOutput ViTEncoder::encode(const Tensor& image) const {
  require(image.ndim() == 3 && image.dim(0) == 3, "encode: image must be [3,H,W]");
  const int h = image.dim(1), w = image.dim(2);
  const int p = cfg_.patch_size, d = cfg_.dim;
  require(h % p == 0 && w % p == 0, "encode: image ", w, "x", h,
          " not a multiple of patch size ", p);
  const int hp = h / p, wp = w / p, n = hp * wp;

  // Patchify: each row is a flattened 3xPxP patch.
  Tensor patches({n, 3 * p * p});
  for (int py = 0; py < hp; ++py) {
    for (int px = 0; px < wp; ++px) {
      double* row = patches.ptr() + size_t(py * wp + px) * 3 * p * p;
      for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            row[(c * p + dy) * p + dx] = image.at3(c, py * p + dy, px * p + dx);
    }
  }

  Var tokens = patch_embed_.apply(nn::constant(std::move(patches)));  // [n, d]

  // Positional embeddings, bilinearly adapted to the actual grid.
  Tensor pos = nn::bilinear_resize_value(pos_grid_->value, hp, wp);  // [d,hp,wp]
  Tensor pos_rows({n, d});
  for (int y = 0; y < hp; ++y)
    for (int x = 0; x < wp; ++x)
      for (int c = 0; c < d; ++c) pos_rows.at2(y * wp + x, c) = pos.at3(c, y, x);
  tokens = nn::add(tokens, nn::constant(std::move(pos_rows)));

  Var cls = nn::add(cls_token_, pos_cls_);
  Var x = nn::concat_rows({cls, tokens});  // [n+1, d]

  std::vector<int> taps = tap_layers(cfg_.depth);
  EncoderOutput out;
  out.patch_size = p;
  out.layer_features.reserve(4);
  size_t tap_cursor = 0;
  for (int layer = 1; layer <= cfg_.depth; ++layer) {
    x = blocks_[layer - 1].forward(x);
    while (tap_cursor < taps.size() && taps[tap_cursor] == layer) {
      Tensor grid({d, hp, wp});
      for (int y = 0; y < hp; ++y)
        for (int xx = 0; xx < wp; ++xx)
          for (int c = 0; c < d; ++c)
            grid.at3(c, y, xx) = x->value.at2(1 + y * wp + xx, c);
      out.layer_features.push_back(std::move(grid));
      ++tap_cursor;
    }
  }
  require(out.layer_features.size() == 4, "encode: expected 4 tapped layers");

  Var normed = final_norm_.apply(nn::slice_rows(x, 0, 1));
  out.cls = Tensor({d});
  for (int c = 0; c < d; ++c) out.cls.data[c] = normed->value.at2(0, c);
  return out;
}

NamedTensors ViTEncoder::named_weights() const {
  NamedTensors out;
  patch_embed_.collect("encoder.patch_embed", out);
  out.emplace_back("encoder.cls_token", cls_token_);
  out.emplace_back("encoder.pos_cls", pos_cls_);
  out.emplace_back("encoder.pos_grid", pos_grid_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(strcat_msg("encoder.block", i), out);
  final_norm_.collect("encoder.final_norm", out);
  return out;
}

Tensor image_to_tensor(const ImageU8& img) {
  require(img.channels == 3, "image_to_tensor: expects RGB");
  Tensor t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) t.at3(c, y, x) = img.at(y, x, c) / 255.0;
  return t;
}

Tensor pad_reflect_to_multiple(const Tensor& image, int multiple) {
  require(image.ndim() == 3, "pad: expects CHW");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return image;
  require(ph - h < h && pw - w < w,
          "pad: image ", w, "x", h, " too small to reflect-pad to multiples of ",
          multiple);
  Tensor out({c, ph, pw});
  for (int cc = 0; cc < c; ++cc) {
    for (int y = 0; y < ph; ++y) {
      int sy = y < h ? y : 2 * h - 2 - y;
      for (int x = 0; x < pw; ++x) {
        int sx = x < w ? x : 2 * w - 2 - x;
        out.at3(cc, y, x) = image.at3(cc, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace coarse

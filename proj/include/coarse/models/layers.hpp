#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coarse/nn/autodiff.hpp"
#include "coarse/rng.hpp"

namespace coarse {

using NamedTensors = std::vector<std::pair<std::string, nn::Var>>;

// Layer helpers built on the autodiff tape. `trainable` decides whether the
// created tensors participate in gradients (decoders) or stay frozen
// constants (the encoder).

struct LinearLayer {
  nn::Var w;  // [in, out]
  nn::Var b;  // [out]

  static LinearLayer init(Rng& rng, int in, int out, bool trainable,
                          double stddev = 0.02);
  nn::Var apply(const nn::Var& x) const;  // [n,in] -> [n,out]
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct LayerNormLayer {
  nn::Var gamma, beta;

  static LayerNormLayer init(int d, bool trainable);
  nn::Var apply(const nn::Var& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct Conv2dLayer {
  nn::Var w;  // [out, in, k, k]
  nn::Var b;  // [out]
  int stride = 1;
  int pad = 0;

  static Conv2dLayer init(Rng& rng, int in, int out, int k, int stride, int pad,
                          bool trainable);
  nn::Var apply(const nn::Var& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct GroupNormLayer {
  nn::Var gamma, beta;
  int groups = 1;

  // groups: 8 when the channel count allows, else whole-tensor normalization.
  static GroupNormLayer init(int channels, bool trainable);
  nn::Var apply(const nn::Var& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Pre-norm transformer block: x += MHA(LN(x)); x += MLP(LN(x)).
struct TransformerBlock {
  LayerNormLayer ln1, ln2;
  LinearLayer qkv;   // [d, 3d]
  LinearLayer proj;  // [d, d]
  LinearLayer fc1, fc2;
  int heads = 1;

  static TransformerBlock init(Rng& rng, int dim, int heads, int mlp_ratio,
                               bool trainable);
  nn::Var forward(const nn::Var& tokens) const;  // [n,d] -> [n,d]
  void collect(const std::string& prefix, NamedTensors& out) const;
};

nn::Var multihead_attention(const nn::Var& tokens, const LinearLayer& qkv,
                            const LinearLayer& proj, int heads);

// Largest head count <= 6 dividing dim.
int pick_head_count(int dim);

}  // namespace coarse

#include "coarse/models/layers.hpp"

#include <cmath>

#include "coarse/error.hpp"

namespace coarse {

using nn::Var;

namespace {
Var make_weight(Rng& rng, std::vector<int> shape, double stddev, bool trainable) {
  nn::Tensor t(shape);
  for (double& v : t.data) v = rng.normal(0.0, stddev);
  return trainable ? nn::param(std::move(t)) : nn::constant(std::move(t));
}

Var make_filled(std::vector<int> shape, double value, bool trainable) {
  nn::Tensor t(std::move(shape), value);
  return trainable ? nn::param(std::move(t)) : nn::constant(std::move(t));
}
}  // namespace

LinearLayer LinearLayer::init(Rng& rng, int in, int out, bool trainable,
                              double stddev) {
  LinearLayer l;
  l.w = make_weight(rng, {in, out}, stddev, trainable);
  l.b = make_filled({out}, 0.0, trainable);
  return l;
}

Var LinearLayer::apply(const Var& x) const {
  return nn::add_rowvec(nn::matmul(x, w), b);
}

void LinearLayer::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

LayerNormLayer LayerNormLayer::init(int d, bool trainable) {
  LayerNormLayer l;
  l.gamma = make_filled({d}, 1.0, trainable);
  l.beta = make_filled({d}, 0.0, trainable);
  return l;
}

Var LayerNormLayer::apply(const Var& x) const { return nn::layer_norm(x, gamma, beta); }

void LayerNormLayer::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Conv2dLayer Conv2dLayer::init(Rng& rng, int in, int out, int k, int stride, int pad,
                              bool trainable) {
  Conv2dLayer l;
  double fan_in = double(in) * k * k;
  l.w = make_weight(rng, {out, in, k, k}, std::sqrt(2.0 / fan_in), trainable);
  l.b = make_filled({out}, 0.0, trainable);
  l.stride = stride;
  l.pad = pad;
  return l;
}

Var Conv2dLayer::apply(const Var& x) const { return nn::conv2d(x, w, b, stride, pad); }

void Conv2dLayer::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

GroupNormLayer GroupNormLayer::init(int channels, bool trainable) {
  GroupNormLayer l;
  l.gamma = make_filled({channels}, 1.0, trainable);
  l.beta = make_filled({channels}, 0.0, trainable);
  l.groups = channels % 8 == 0 ? 8 : 1;
  return l;
}

Var GroupNormLayer::apply(const Var& x) const {
  return nn::group_norm(x, gamma, beta, groups);
}

void GroupNormLayer::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

int pick_head_count(int dim) {
  for (int h : {6, 4, 3, 2})
    if (dim % h == 0) return h;
  return 1;
}

Var multihead_attention(const Var& tokens, const LinearLayer& qkv,
                        const LinearLayer& proj, int heads) {
  const int d = tokens->value.dim(1);
  require(d % heads == 0, "attention: dim ", d, " not divisible by heads ", heads);
  const int dh = d / heads;
  Var fused = qkv.apply(tokens);  // [n, 3d]
  Var q = nn::slice_cols(fused, 0, d);
  Var k = nn::slice_cols(fused, d, 2 * d);
  Var v = nn::slice_cols(fused, 2 * d, 3 * d);
  std::vector<Var> head_outputs;
  head_outputs.reserve(heads);
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  for (int hidx = 0; hidx < heads; ++hidx) {
    Var qh = nn::slice_cols(q, hidx * dh, (hidx + 1) * dh);
    Var kh = nn::slice_cols(k, hidx * dh, (hidx + 1) * dh);
    Var vh = nn::slice_cols(v, hidx * dh, (hidx + 1) * dh);
    Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt);
    Var attn = nn::softmax_rows(scores);
    head_outputs.push_back(nn::matmul(attn, vh));
  }
  Var merged = heads == 1 ? head_outputs[0] : nn::concat_cols(head_outputs);
  return proj.apply(merged);
}

TransformerBlock TransformerBlock::init(Rng& rng, int dim, int heads, int mlp_ratio,
                                        bool trainable) {
  TransformerBlock b;
  b.ln1 = LayerNormLayer::init(dim, trainable);
  b.ln2 = LayerNormLayer::init(dim, trainable);
  b.qkv = LinearLayer::init(rng, dim, 3 * dim, trainable);
  b.proj = LinearLayer::init(rng, dim, dim, trainable);
  b.fc1 = LinearLayer::init(rng, dim, mlp_ratio * dim, trainable);
  b.fc2 = LinearLayer::init(rng, mlp_ratio * dim, dim, trainable);
  b.heads = heads;
  return b;
}

Var TransformerBlock::forward(const Var& tokens) const {
  Var x = nn::add(tokens, multihead_attention(ln1.apply(tokens), qkv, proj, heads));
  Var h = fc2.apply(nn::gelu(fc1.apply(ln2.apply(x))));
  return nn::add(x, h);
}

void TransformerBlock::collect(const std::string& prefix, NamedTensors& out) const {
  ln1.collect(prefix + ".ln1", out);
  ln2.collect(prefix + ".ln2", out);
  qkv.collect(prefix + ".qkv", out);
  proj.collect(prefix + ".proj", out);
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

}  // namespace coarse

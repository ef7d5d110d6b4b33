#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "coarse/nn/tensor.hpp"

namespace coarse::nn {

// Reverse-mode tape node. Nodes are created in topological order (parents
// before children), so creation ids double as the traversal order.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  uint64_t id = 0;

  Tensor& ensure_grad();
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var param(Tensor value);

// Accumulates d(root)/d(leaf) into every reachable node's grad. Root must be
// a scalar. Parameter grads are accumulated, not overwritten; callers zero
// them between optimizer steps.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

// ---- elementwise / shape ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var gelu(const Var& x);
Var reshape(const Var& x, std::vector<int> shape);

// ---- 2D linear algebra ----
Var matmul(const Var& a, const Var& b);      // [m,k] x [k,n] -> [m,n]
Var transpose(const Var& x);                 // [m,n] -> [n,m]
Var add_rowvec(const Var& x, const Var& b);  // [n,d] + [d]
Var slice_rows(const Var& x, int r0, int r1);
Var slice_cols(const Var& x, int c0, int c1);
Var concat_rows(const std::vector<Var>& xs);
Var concat_cols(const std::vector<Var>& xs);
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// ---- CHW image ops ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups,
               double eps = 1e-5);
Var bilinear_resize(const Var& x, int out_h, int out_w);
Var concat_channels(const std::vector<Var>& xs);

// Forward-only bilinear resize used outside the tape.
Tensor bilinear_resize_value(const Tensor& x, int out_h, int out_w);

// ---- loss ----
// Pixel-wise weighted cross entropy over valid (non-ignore) targets,
// normalized by the sum of applied weights. All-ignore targets give 0.
Var weighted_ce_loss(const Var& logits, const std::vector<uint8_t>& target,
                     int target_h, int target_w, int ignore_value,
                     const std::vector<double>& class_weights);

}  // namespace coarse::nn

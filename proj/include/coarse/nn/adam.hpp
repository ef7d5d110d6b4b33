#pragma once

#include "coarse/nn/autodiff.hpp"

namespace coarse::nn {

// Adam with bias correction over a fixed parameter list.
class Adam {
public:
  explicit Adam(std::vector<Var> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad() { nn::zero_grad(params_); }
  const std::vector<Var>& params() const { return params_; }
  double learning_rate() const { return lr_; }

private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace coarse::nn

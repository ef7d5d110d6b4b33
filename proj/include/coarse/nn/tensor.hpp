#pragma once

#include <cstdint>
#include <vector>

namespace coarse::nn {

// Dense row-major tensor of doubles. Double precision keeps the analytic
// gradients directly comparable against central finite differences.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, double fill);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) { return Tensor(std::move(s), v); }
  static Tensor scalar(double v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  // 2D / 3D accessors (row-major).
  double& at2(int i, int j) { return data[size_t(i) * shape[1] + j]; }
  double at2(int i, int j) const { return data[size_t(i) * shape[1] + j]; }
  double& at3(int c, int y, int x) {
    return data[(size_t(c) * shape[1] + y) * shape[2] + x];
  }
  double at3(int c, int y, int x) const {
    return data[(size_t(c) * shape[1] + y) * shape[2] + x];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

int64_t shape_numel(const std::vector<int>& shape);

}  // namespace coarse::nn

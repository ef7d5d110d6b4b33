#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coarse/mask.hpp"

namespace coarse {

// C×C count matrix; rows index ground truth, columns index prediction.
// Pixels whose ground truth is ignore are never counted.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  uint64_t valid_pixels() const { return valid_pixels_; }
  uint64_t at(int gt, int pred) const;
  void add(int gt, int pred, uint64_t count = 1);
  // Elementwise sum; confusion over a dataset is the sum of per-image matrices.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

private:
  int num_classes_;
  uint64_t valid_pixels_ = 0;
  std::vector<uint64_t> counts_;
};

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& gt);

struct MiouReport {
  double miou = 0.0;
  std::vector<double> per_class_iou;      // NaN for classes with zero union
  std::vector<bool> class_included;       // false when union is zero
  uint64_t valid_pixels = 0;
};

// Per-class IoU = TP / (TP + FP + FN); classes with zero union are excluded
// from the mean (convention surfaced in every emitted report).
MiouReport miou(const ConfusionMatrix& cm);

// Human-readable table with per-class IoU, mIoU and pixel counts.
std::string miou_report_text(const MiouReport& report, const ClassTaxonomy& taxonomy,
                             const std::string& title);
std::string miou_report_json(const MiouReport& report, const ClassTaxonomy& taxonomy);

}  // namespace coarse

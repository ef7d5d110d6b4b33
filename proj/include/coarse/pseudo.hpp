#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coarse/dataio.hpp"
#include "coarse/metrics.hpp"
#include "coarse/models/model.hpp"

namespace coarse {

struct FusionReport {
  double density = 0.0;                  // non-ignore pseudo pixels / pixels
  std::vector<uint64_t> per_class_kept;  // kept pixel counts per class
  uint64_t total_pixels = 0;
  // Quality against dense ground truth where available. `quality_miou`
  // scores agreement pixels only; `strict_miou` additionally counts
  // pseudo-ignore pixels on labeled ground truth as false negatives.
  std::optional<double> quality_miou;
  std::optional<double> strict_miou;
  std::vector<std::pair<std::string, double>> per_image_density;

  std::string to_json() const;
};

// Keeps a pixel's label only where both predictions agree; disagreement
// becomes ignore. Output provenance is pseudo.
LabelMask fuse_by_disagreement(const LabelMask& pred_a, const LabelMask& pred_b);

// Predicts every train-split image with both models, fuses, and writes pseudo
// rasters under out_dir. Returns the pseudo-labeled manifest and the report;
// quality metrics are filled when dense ground truth exists.
struct PseudoLabelResult {
  DatasetManifest manifest;
  FusionReport report;
};
PseudoLabelResult generate_pseudo_labels(const DatasetManifest& manifest,
                                         const SegModel& model_a,
                                         const SegModel& model_b,
                                         const std::string& out_dir);

// mIoU restricted to pixels where `mask` is non-ignore (gt ignore excluded).
MiouReport miou_on_labeled_region(const LabelMask& pred, const LabelMask& gt,
                                  const LabelMask& region);

}  // namespace coarse

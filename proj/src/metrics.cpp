#include "coarse/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "coarse/error.hpp"

namespace coarse {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
  require(num_classes > 0, "confusion matrix: class count must be positive");
}

uint64_t ConfusionMatrix::at(int gt, int pred) const {
  require(gt >= 0 && gt < num_classes_ && pred >= 0 && pred < num_classes_,
          "confusion matrix: index out of range");
  return counts_[static_cast<size_t>(gt) * num_classes_ + pred];
}

void ConfusionMatrix::add(int gt, int pred, uint64_t count) {
  require(gt >= 0 && gt < num_classes_ && pred >= 0 && pred < num_classes_,
          "confusion matrix: index out of range");
  counts_[static_cast<size_t>(gt) * num_classes_ + pred] += count;
  valid_pixels_ += count;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  require(num_classes_ == other.num_classes_,
          "confusion matrix: cannot merge different class counts");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  valid_pixels_ += other.valid_pixels_;
  return *this;
}

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& gt) {
  require(pred.height == gt.height && pred.width == gt.width,
          "confusion: prediction and ground truth shapes differ (",
          pred.width, "x", pred.height, " vs ", gt.width, "x", gt.height, ")");
  require(pred.taxonomy.num_classes() == gt.taxonomy.num_classes(),
          "confusion: taxonomies differ in class count");
  const int c = gt.taxonomy.num_classes();
  const int gt_ignore = gt.taxonomy.ignore_index();
  ConfusionMatrix cm(c);
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      int g = gt.at(y, x);
      if (g == gt_ignore) continue;
      int p = pred.at(y, x);
      require(p != pred.taxonomy.ignore_index(),
              "confusion: prediction contains ignore at (", x, ",", y,
              ") inside the counted region");
      cm.add(g, p);
    }
  }
  return cm;
}

MiouReport miou(const ConfusionMatrix& cm) {
  require(cm.valid_pixels() > 0, "miou: no valid pixels in confusion matrix");
  const int c = cm.num_classes();
  MiouReport report;
  report.valid_pixels = cm.valid_pixels();
  report.per_class_iou.assign(c, std::numeric_limits<double>::quiet_NaN());
  report.class_included.assign(c, false);
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < c; ++k) {
    uint64_t tp = cm.at(k, k);
    uint64_t fp = 0, fn = 0;
    for (int j = 0; j < c; ++j) {
      if (j == k) continue;
      fp += cm.at(j, k);
      fn += cm.at(k, j);
    }
    uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    report.per_class_iou[k] = double(tp) / double(uni);
    report.class_included[k] = true;
    sum += report.per_class_iou[k];
    ++included;
  }
  require(included > 0, "miou: every class has zero union");
  report.miou = sum / included;
  return report;
}

std::string miou_report_text(const MiouReport& report, const ClassTaxonomy& taxonomy,
                             const std::string& title) {
  std::string out;
  out += title + "\n";
  out += strcat_msg("valid pixels: ", report.valid_pixels, "\n");
  char buf[128];
  for (size_t i = 0; i < report.per_class_iou.size(); ++i) {
    const std::string& name =
        int(i) < taxonomy.num_classes() ? taxonomy.class_name(int(i)) : "?";
    if (report.class_included[i]) {
      std::snprintf(buf, sizeof(buf), "  %-18s %.4f\n", name.c_str(),
                    report.per_class_iou[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "  %-18s (zero union, excluded)\n",
                    name.c_str());
    }
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "  mIoU %.4f (mean over classes with nonzero union)\n", report.miou);
  out += buf;
  return out;
}

std::string miou_report_json(const MiouReport& report, const ClassTaxonomy& taxonomy) {
  nlohmann::json j;
  j["miou"] = report.miou;
  j["valid_pixels"] = report.valid_pixels;
  j["zero_union_convention"] = "excluded_from_mean";
  j["per_class"] = nlohmann::json::array();
  for (size_t i = 0; i < report.per_class_iou.size(); ++i) {
    nlohmann::json e;
    e["class"] = int(i) < taxonomy.num_classes() ? taxonomy.class_name(int(i)) : "?";
    e["included"] = bool(report.class_included[i]);
    if (report.class_included[i]) e["iou"] = report.per_class_iou[i];
    j["per_class"].push_back(e);
  }
  return j.dump(2);
}

}  // namespace coarse

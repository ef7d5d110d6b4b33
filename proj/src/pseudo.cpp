#include "coarse/pseudo.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"

namespace fs = std::filesystem;

namespace coarse {

using nlohmann::json;

std::string FusionReport::to_json() const {
  json j;
  j["density"] = density;
  j["total_pixels"] = total_pixels;
  j["per_class_kept"] = per_class_kept;
  if (quality_miou) j["quality_miou"] = *quality_miou;
  if (strict_miou) j["strict_miou"] = *strict_miou;
  j["quality_convention"] =
      "agreement pixels only; strict variant counts pseudo-ignore as errors";
  j["per_image_density"] = json::array();
  for (const auto& [path, d] : per_image_density)
    j["per_image_density"].push_back({{"label", path}, {"density", d}});
  return j.dump(2);
}

LabelMask fuse_by_disagreement(const LabelMask& pred_a, const LabelMask& pred_b) {
  require(pred_a.height == pred_b.height && pred_a.width == pred_b.width,
          "fuse_by_disagreement: shape mismatch (", pred_a.width, "x", pred_a.height,
          " vs ", pred_b.width, "x", pred_b.height, ")");
  require(pred_a.taxonomy.num_classes() == pred_b.taxonomy.num_classes() &&
              pred_a.taxonomy.ignore_index() == pred_b.taxonomy.ignore_index(),
          "fuse_by_disagreement: taxonomy mismatch");
  LabelMask out(pred_a.height, pred_a.width, pred_a.taxonomy, Provenance::kPseudo);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = pred_a.data[i] == pred_b.data[i]
                      ? pred_a.data[i]
                      : uint8_t(pred_a.taxonomy.ignore_index());
  return out;
}

MiouReport miou_on_labeled_region(const LabelMask& pred, const LabelMask& gt,
                                  const LabelMask& region) {
  require(pred.height == gt.height && pred.width == gt.width &&
              region.height == gt.height && region.width == gt.width,
          "miou_on_labeled_region: shape mismatch");
  LabelMask masked_gt = gt;
  const int ignore = gt.taxonomy.ignore_index();
  for (size_t i = 0; i < masked_gt.data.size(); ++i)
    if (region.data[i] == region.taxonomy.ignore_index())
      masked_gt.data[i] = uint8_t(ignore);
  return miou(confusion(pred, masked_gt));
}

PseudoLabelResult generate_pseudo_labels(const DatasetManifest& manifest,
                                         const SegModel& model_a,
                                         const SegModel& model_b,
                                         const std::string& out_dir) {
  require(model_a.taxonomy().num_classes() == model_b.taxonomy().num_classes(),
          "generate_pseudo_labels: models disagree on class count");
  fs::create_directories(out_dir);

  PseudoLabelResult result;
  result.manifest.name = manifest.name + "_pseudo";
  result.manifest.taxonomy = manifest.taxonomy;
  const int c = manifest.taxonomy.num_classes();
  result.report.per_class_kept.assign(size_t(c), 0);

  // Quality bookkeeping: `quality_cm` scores agreement pixels only; the
  // tp/fp/fn tallies additionally count pseudo-ignore on labeled ground
  // truth as false negatives (strict variant).
  ConfusionMatrix quality_cm(c);
  bool any_gt = false;
  std::vector<uint64_t> tp(c, 0), fp(c, 0), fn(c, 0);

  uint64_t kept_total = 0, pixel_total = 0;
  size_t index = 0;
  for (const ImageSample& sample : manifest.samples) {
    if (sample.split != Split::kTrain) {
      result.manifest.samples.push_back(sample);
      continue;
    }
    ImageU8 img = read_png(sample.image_path);
    LabelMask pred_a = model_a.predict(img);
    LabelMask pred_b = model_b.predict(img);
    LabelMask fused = fuse_by_disagreement(pred_a, pred_b);

    fs::path out_path =
        fs::path(out_dir) / strcat_msg("pseudo_", index, ".png");
    save_label_png(fused, out_path.string());

    uint64_t kept = 0;
    for (uint8_t v : fused.data) {
      if (v == manifest.taxonomy.ignore_index()) continue;
      ++result.report.per_class_kept[v];
      ++kept;
    }
    kept_total += kept;
    pixel_total += fused.pixel_count();
    result.report.per_image_density.emplace_back(
        out_path.string(), double(kept) / double(fused.pixel_count()));

    if (sample.labeled) {
      LabelMask gt = load_label_png(sample.label_path, manifest.taxonomy).mask;
      any_gt = true;
      for (size_t i = 0; i < gt.data.size(); ++i) {
        int g = gt.data[i];
        if (g == manifest.taxonomy.ignore_index()) continue;
        int p = fused.data[i];
        if (p == manifest.taxonomy.ignore_index()) {
          ++fn[g];  // strict variant only
          continue;
        }
        quality_cm.add(g, p);
        if (p == g) {
          ++tp[g];
        } else {
          ++fn[g];
          ++fp[p];
        }
      }
    }

    ImageSample pseudo_sample = sample;
    pseudo_sample.label_path = out_path.string();
    pseudo_sample.labeled = true;
    result.manifest.samples.push_back(std::move(pseudo_sample));
    ++index;
  }

  require(pixel_total > 0, "generate_pseudo_labels: no train images in manifest '",
          manifest.name, "'");
  result.report.total_pixels = pixel_total;
  result.report.density = double(kept_total) / double(pixel_total);

  if (any_gt && quality_cm.valid_pixels() > 0) {
    result.report.quality_miou = miou(quality_cm).miou;
    double sum = 0.0;
    int included = 0;
    for (int k = 0; k < c; ++k) {
      uint64_t uni = tp[k] + fp[k] + fn[k];
      if (uni == 0) continue;
      sum += double(tp[k]) / double(uni);
      ++included;
    }
    if (included > 0) result.report.strict_miou = sum / included;
  }
  return result;
}

}  // namespace coarse

#pragma once

#include <string>

#include "coarse/dataio.hpp"

namespace coarse {

// Deterministic colored-blob scenes with exact dense labels, plus a
// hue-shifted out-of-distribution twin set. Image size must divide evenly by
// 4x the toy encoder patch size used downstream.
struct SynthConfig {
  int image_count = 32;          // per domain
  int height = 64, width = 64;
  int class_count = 4;           // <= 9, includes the background class
  int min_blobs = 2, max_blobs = 5;
  double ood_hue_shift_deg = 120.0;
  double val_fraction = 0.25;    // in-distribution val split
  uint64_t seed = 0;
  bool emit_ood = true;

  void validate() const;
};

// Writes images/ and labels/ under out_dir plus a manifest combining the
// in-distribution train/val split and (optionally) the hue-shifted
// out-of-distribution train samples.
DatasetManifest generate_synthset(const SynthConfig& cfg, const std::string& out_dir);

// Scene generator used by the writer; exposed for tests.
struct SynthScene {
  ImageU8 image;
  LabelMask labels;
};
SynthScene generate_scene(const SynthConfig& cfg, uint64_t scene_seed,
                          const ClassTaxonomy& taxonomy);

}  // namespace coarse

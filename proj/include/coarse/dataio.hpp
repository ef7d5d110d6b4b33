#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "coarse/io/image.hpp"
#include "coarse/mask.hpp"
#include "coarse/taxonomy.hpp"

namespace coarse {

enum class DomainTag { kInDistribution, kOutOfDistribution };
enum class Split { kTrain, kVal };

std::string domain_name(DomainTag d);
DomainTag domain_from_name(const std::string& name);
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ImageSample {
  std::string image_path;
  std::string label_path;  // empty when unlabeled
  DomainTag domain = DomainTag::kInDistribution;
  Split split = Split::kTrain;
  bool labeled = false;
};

struct DatasetManifest {
  std::string name;
  ClassTaxonomy taxonomy = default_taxonomy();
  std::vector<ImageSample> samples;

  std::vector<size_t> indices_of(Split split) const;
  // Throws on duplicate paths or labeled samples without a label path.
  void validate() const;
};

enum class PaletteMode { kStrict, kLenient };

struct LabelLoadResult {
  LabelMask mask;
  uint64_t unmatched_pixels = 0;  // lenient mode: off-palette pixels set to ignore
};

// Decodes a color raster into class indices by exact palette match.
// Strict mode rejects the first off-palette pixel with its color and
// coordinate; lenient mode maps such pixels to ignore and counts them.
LabelLoadResult load_label_png(const std::string& path, const ClassTaxonomy& taxonomy,
                               PaletteMode mode = PaletteMode::kStrict);

// Encodes class indices back to palette colors; ignore becomes black.
void save_label_png(const LabelMask& mask, const std::string& path);

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Directory-layout adapters. Both pair image files with same-stem label files
// and tag every sample train/in-distribution; callers re-split as needed.
// RUGD-style: <frames_root>/<scene>/<frame>.png + <annotations_root>/<scene>/<frame>.png
DatasetManifest rugd_style_manifest(const std::string& frames_root,
                                    const std::string& annotations_root,
                                    const ClassTaxonomy& taxonomy,
                                    const std::string& name = "rugd");
// Rellis-3D-style: <root>/<sequence>/pylon_camera_node/<frame>.*
//                + <root>/<sequence>/pylon_camera_node_label_color/<frame>.png
DatasetManifest rellis_style_manifest(const std::string& root,
                                      const ClassTaxonomy& taxonomy,
                                      const std::string& name = "rellis3d");

struct PastedScene {
  ImageU8 image;
  LabelMask labels;
  uint64_t pasted_pixels = 0;
};

// Copies every connected component of the requested classes from the donor
// into the host at uniformly random positions (component bounding-box center
// kept in-frame, clipped at borders, last writer wins). Host labels change
// only under pasted pixels.
PastedScene cut_and_paste(const ImageSample& donor, const ImageSample& host,
                          const std::set<int>& classes, const ClassTaxonomy& taxonomy,
                          uint64_t rng_seed);

}  // namespace coarse

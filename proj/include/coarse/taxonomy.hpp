#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace coarse {

struct LabelMask;
struct DatasetManifest;

using Rgb = std::array<uint8_t, 3>;

// Ignore pixels are stored as this value in every label raster; it is outside
// any class range and maps to black (0,0,0) on disk.
constexpr int kIgnoreIndex = 255;
constexpr Rgb kIgnoreColor = {0, 0, 0};

// Ordered class set with per-class RGB colors. Index identity is the row
// position, stable across runs and checkpoints.
class ClassTaxonomy {
public:
  ClassTaxonomy(std::string name, std::vector<std::string> class_names,
                std::vector<Rgb> colors, int ignore_index = kIgnoreIndex);

  const std::string& name() const { return name_; }
  int num_classes() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& class_names() const { return names_; }
  const std::vector<Rgb>& colors() const { return colors_; }
  int ignore_index() const { return ignore_index_; }

  const std::string& class_name(int index) const;
  Rgb color(int index) const;
  // Returns the class index for a name, or -1 when absent.
  int index_of(const std::string& class_name) const;
  // Returns the class index for a color, or -1 when unmatched.
  int index_of_color(const Rgb& color) const;

  bool operator==(const ClassTaxonomy&) const = default;

private:
  std::string name_;
  std::vector<std::string> names_;
  std::vector<Rgb> colors_;
  int ignore_index_;
};

// The 9-class off-road set used throughout the pipeline.
const ClassTaxonomy& default_taxonomy();

// Source-dataset taxonomies matching the shipped mappings below.
const ClassTaxonomy& rellis3d_taxonomy();
const ClassTaxonomy& rugd_taxonomy();

// Total, single-valued map from every source class to a target class.
class ClassMapping {
public:
  ClassMapping(ClassTaxonomy source, ClassTaxonomy target,
               std::vector<int> target_of_source);

  const ClassTaxonomy& source() const { return source_; }
  const ClassTaxonomy& target() const { return target_; }
  int map(int source_index) const;
  const std::vector<int>& table() const { return target_of_source_; }

  // Compose: (this ∘ next)(x) = next.map(this->map(x)).
  ClassMapping then(const ClassMapping& next) const;

private:
  ClassTaxonomy source_;
  ClassTaxonomy target_;
  std::vector<int> target_of_source_;
};

// Builds a validated mapping from (source name, target name) pairs. Every
// source class must appear exactly once; unknown names are rejected.
ClassMapping build_mapping(const std::vector<std::pair<std::string, std::string>>& pairs,
                           const ClassTaxonomy& src, const ClassTaxonomy& dst);

ClassMapping identity_mapping(const ClassTaxonomy& taxonomy);

// Shipped dataset mappings onto the default 9-class set.
ClassMapping rellis3d_mapping();
ClassMapping rugd_mapping();

// Replaces every pixel by its mapped target index; ignore pixels pass through.
LabelMask remap_mask(const LabelMask& mask, const ClassMapping& mapping);

// Per-class fraction of labeled pixels; sums to 1 over labeled data.
struct ClassFrequencyTable {
  std::vector<double> fractions;
  uint64_t labeled_pixels = 0;

  double fraction(int class_index) const { return fractions.at(class_index); }
};

ClassFrequencyTable class_frequencies(const DatasetManifest& manifest);

// Published per-class pixel fractions for the two open datasets, used for
// inverse-frequency loss weighting without rescanning the data.
ClassFrequencyTable rellis3d_class_frequencies();
ClassFrequencyTable rugd_class_frequencies();

// Structured-text (JSON) serialization of taxonomies and mappings.
std::string taxonomy_to_json(const ClassTaxonomy& taxonomy);
ClassTaxonomy taxonomy_from_json(const std::string& json_text);
std::string mapping_to_json(const ClassMapping& mapping);
ClassMapping mapping_from_json(const std::string& json_text);

}  // namespace coarse

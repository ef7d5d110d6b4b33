#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coarse/taxonomy.hpp"

namespace coarse {

enum class Provenance { kDense, kCoarse, kPseudo, kAugmented };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// H×W raster of class indices (uint8), ignore_index for unlabeled pixels.
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;
  ClassTaxonomy taxonomy;
  Provenance provenance = Provenance::kDense;

  LabelMask(int h, int w, const ClassTaxonomy& t,
            Provenance prov = Provenance::kDense, uint8_t fill = kIgnoreIndex)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill),
        taxonomy(t), provenance(prov) {}

  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t pixel_count() const { return data.size(); }
  bool is_ignore(int y, int x) const { return at(y, x) == taxonomy.ignore_index(); }

  // Throws when any pixel is outside [0, num_classes) ∪ {ignore}.
  void validate() const;
};

// Fraction of non-ignore pixels.
double label_density(const LabelMask& mask);

}  // namespace coarse

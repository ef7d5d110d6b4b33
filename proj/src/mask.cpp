#include "coarse/mask.hpp"

#include "coarse/error.hpp"

namespace coarse {

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kDense: return "dense";
    case Provenance::kCoarse: return "coarse";
    case Provenance::kPseudo: return "pseudo";
    case Provenance::kAugmented: return "augmented";
  }
  fail("unknown provenance value");
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "dense") return Provenance::kDense;
  if (name == "coarse") return Provenance::kCoarse;
  if (name == "pseudo") return Provenance::kPseudo;
  if (name == "augmented") return Provenance::kAugmented;
  fail("unknown provenance '", name, "'");
}

void LabelMask::validate() const {
  const int n = taxonomy.num_classes();
  const int ignore = taxonomy.ignore_index();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int v = at(y, x);
      require(v == ignore || (v >= 0 && v < n),
              "label mask: value ", v, " at (", x, ",", y,
              ") outside class range of taxonomy '", taxonomy.name(), "'");
    }
  }
}

double label_density(const LabelMask& mask) {
  if (mask.data.empty()) return 0.0;
  size_t labeled = 0;
  const int ignore = mask.taxonomy.ignore_index();
  for (uint8_t v : mask.data)
    if (v != ignore) ++labeled;
  return static_cast<double>(labeled) / static_cast<double>(mask.data.size());
}

}  // namespace coarse

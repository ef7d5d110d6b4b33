#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "coarse/mask.hpp"
#include "coarse/rng.hpp"

namespace coarse {

struct BinaryRaster {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  BinaryRaster(int h, int w, uint8_t fill = 0)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
};

struct CoarsifyConfig {
  int boundary_radius_px = 7;
  double polygon_area_fraction = 0.1;
  int polygon_count = 3;
  std::set<int> exempt_classes;  // default: {water, wall-like, diverse-obstacle}
  // When set, exempt classes also skip boundary-band erosion (variant reading
  // of the procedure; off by default).
  bool exempt_skip_band = false;

  void validate() const;
};

// Exempt set for the default taxonomy: low-frequency classes whose labels are
// kept everywhere outside the boundary band.
std::set<int> default_exempt_classes(const ClassTaxonomy& taxonomy);

// Squared Euclidean distance to the nearest boundary pixel, exact (Meijster
// two-pass transform, integer arithmetic). Pixels on no-boundary masks get
// a sentinel larger than any attainable distance.
std::vector<int64_t> squared_boundary_distance(const LabelMask& mask);

// True for pixels whose Euclidean distance to the nearest semantic boundary
// is <= radius. A boundary pixel has a 4-neighbor of a different class;
// ignore counts as a distinct class.
BinaryRaster boundary_band(const LabelMask& mask, int radius_px);

// Filled convex polygon over k in [3,8] uniformly sampled vertices,
// rejection-resampled until the rasterized area lands in
// [0.5, 1.5] * area_fraction * H * W. area_fraction == 1 short-circuits to
// the full-frame rectangle.
BinaryRaster sample_polygon(int height, int width, double area_fraction, Rng& rng);

struct CoarsifyResult {
  LabelMask mask;
  double density = 0.0;
};

// Dense -> coarse: erase the boundary band, then keep labels inside sampled
// polygons; exempt classes bypass the polygon test.
CoarsifyResult coarsify_mask(const LabelMask& mask, const CoarsifyConfig& cfg, Rng& rng);

}  // namespace coarse

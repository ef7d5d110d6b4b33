#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coarse/coarsify.hpp"
#include "coarse/mask.hpp"
#include "coarse/rng.hpp"

namespace coarse::testutil {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("coarse_" + tag + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline LabelMask random_mask(int h, int w, int num_classes, Rng& rng,
                             double ignore_prob = 0.0) {
  LabelMask mask(h, w, default_taxonomy(), Provenance::kDense);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (ignore_prob > 0.0 && rng.uniform() < ignore_prob)
        mask.at(y, x) = uint8_t(mask.taxonomy.ignore_index());
      else
        mask.at(y, x) = uint8_t(rng.uniform_int(0, num_classes - 1));
    }
  }
  return mask;
}

// Blocky random mask: large same-class regions so boundary bands do not cover
// everything.
inline LabelMask random_blocky_mask(int h, int w, int num_classes, int block,
                                    Rng& rng) {
  LabelMask mask(h, w, default_taxonomy(), Provenance::kDense);
  for (int by = 0; by < (h + block - 1) / block; ++by) {
    for (int bx = 0; bx < (w + block - 1) / block; ++bx) {
      uint8_t cls = uint8_t(rng.uniform_int(0, num_classes - 1));
      for (int y = by * block; y < std::min(h, (by + 1) * block); ++y)
        for (int x = bx * block; x < std::min(w, (bx + 1) * block); ++x)
          mask.at(y, x) = cls;
    }
  }
  return mask;
}

// Brute-force oracle: squared Euclidean distance to the nearest boundary
// pixel by scanning all pairs.
inline std::vector<int64_t> brute_force_boundary_distance(const LabelMask& mask) {
  const int h = mask.height, w = mask.width;
  std::vector<std::pair<int, int>> boundary;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int v = mask.at(y, x);
      bool edge = (x + 1 < w && mask.at(y, x + 1) != v) ||
                  (x > 0 && mask.at(y, x - 1) != v) ||
                  (y + 1 < h && mask.at(y + 1, x) != v) ||
                  (y > 0 && mask.at(y - 1, x) != v);
      if (edge) boundary.emplace_back(y, x);
    }
  }
  std::vector<int64_t> dist(size_t(h) * w, int64_t(1'000'000'000) * 1'000'000'000);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int64_t best = dist[size_t(y) * w + x];
      for (auto [by, bx] : boundary) {
        int64_t dy = y - by, dx = x - bx;
        best = std::min(best, dy * dy + dx * dx);
      }
      dist[size_t(y) * w + x] = best;
    }
  }
  return dist;
}

}  // namespace coarse::testutil

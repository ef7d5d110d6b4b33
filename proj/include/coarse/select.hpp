#pragma once

#include <cstdint>
#include <vector>

#include "coarse/dataio.hpp"
#include "coarse/models/encoder.hpp"

namespace coarse {

struct EmbeddingMatrix {
  int n = 0;
  int d = 0;
  std::vector<double> rows;       // n*d row-major
  std::vector<size_t> row_ids;    // manifest sample indices

  double* row(int i) { return rows.data() + size_t(i) * d; }
  const double* row(int i) const { return rows.data() + size_t(i) * d; }
  void validate() const;
};

// One CLS vector per manifest sample, rows in manifest order. Images are
// reflect-padded to patch multiples before encoding.
EmbeddingMatrix extract_cls_embeddings(const DatasetManifest& manifest,
                                       const ViTEncoder& encoder);
EmbeddingMatrix extract_cls_embeddings(const DatasetManifest& manifest,
                                       const ViTEncoder& encoder,
                                       const std::vector<size_t>& sample_indices);

// Deterministic greedy farthest point sampling under Euclidean distance.
// Seed pick: farthest row from the centroid; every later pick maximizes its
// minimum distance to the selected set. Ties resolve to the lowest index.
// Returns visiting order of length k.
std::vector<int> farthest_point_sample(const EmbeddingMatrix& emb, int k);

}  // namespace coarse

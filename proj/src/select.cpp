#include "coarse/select.hpp"

#include <cmath>
#include <limits>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"

namespace coarse {

void EmbeddingMatrix::validate() const {
  require(n >= 1 && d >= 1, "embeddings: need at least one row");
  require(rows.size() == size_t(n) * d, "embeddings: row storage mismatch");
  require(row_ids.size() == size_t(n), "embeddings: row id count mismatch");
  for (double v : rows)
    require(std::isfinite(v), "embeddings: non-finite entry");
}

EmbeddingMatrix extract_cls_embeddings(const DatasetManifest& manifest,
                                       const ViTEncoder& encoder) {
  std::vector<size_t> all(manifest.samples.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  return extract_cls_embeddings(manifest, encoder, all);
}

EmbeddingMatrix extract_cls_embeddings(const DatasetManifest& manifest,
                                       const ViTEncoder& encoder,
                                       const std::vector<size_t>& sample_indices) {
  require(!sample_indices.empty(), "extract_cls_embeddings: no samples selected");
  EmbeddingMatrix emb;
  emb.n = int(sample_indices.size());
  emb.d = encoder.dim();
  emb.rows.resize(size_t(emb.n) * emb.d);
  emb.row_ids = sample_indices;
  for (int i = 0; i < emb.n; ++i) {
    size_t idx = sample_indices[size_t(i)];
    require(idx < manifest.samples.size(), "extract_cls_embeddings: index ", idx,
            " out of range");
    const std::string& path = manifest.samples[idx].image_path;
    try {
      nn::Tensor img = image_to_tensor(read_png(path));
      nn::Tensor padded = pad_reflect_to_multiple(img, encoder.patch_size());
      EncoderOutput out = encoder.encode(padded);
      std::copy(out.cls.data.begin(), out.cls.data.end(), emb.row(i));
    } catch (const Error& e) {
      fail("extract_cls_embeddings: sample ", idx, " ('", path, "'): ", e.what());
    }
  }
  emb.validate();
  return emb;
}

std::vector<int> farthest_point_sample(const EmbeddingMatrix& emb, int k) {
  emb.validate();
  require(k >= 1 && k <= emb.n, "farthest_point_sample: k=", k,
          " out of range [1, ", emb.n, "]");
  const int n = emb.n, d = emb.d;

  // Seed: farthest point from the centroid, ties to the lowest index.
  std::vector<double> centroid(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centroid[j] += emb.row(i)[j];
  for (double& v : centroid) v /= n;

  auto sqdist_to = [&](int i, const double* p) {
    double acc = 0.0;
    const double* r = emb.row(i);
    for (int j = 0; j < d; ++j) {
      double diff = r[j] - p[j];
      acc += diff * diff;
    }
    return acc;
  };

  int seed = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double dist = sqdist_to(i, centroid.data());
    if (dist > best) {
      best = dist;
      seed = i;
    }
  }

  std::vector<int> order;
  order.reserve(k);
  order.push_back(seed);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<uint8_t> taken(n, 0);
  taken[seed] = 1;
  int last = seed;
  while (int(order.size()) < k) {
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double dist = sqdist_to(i, emb.row(last));
      if (dist < min_dist[i]) min_dist[i] = dist;
    }
    int pick = -1;
    double best_min = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (min_dist[i] > best_min) {
        best_min = min_dist[i];
        pick = i;
      }
    }
    taken[pick] = 1;
    order.push_back(pick);
    last = pick;
  }
  return order;
}

}  // namespace coarse

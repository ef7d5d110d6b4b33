#include "coarse/coarsify.hpp"

#include <algorithm>
#include <cmath>

#include "coarse/error.hpp"

namespace coarse {

namespace {
// Distances are compared squared; this sentinel squares without overflow.
constexpr int64_t kFar = 1'000'000'000;
}

size_t BinaryRaster::count() const {
  size_t n = 0;
  for (uint8_t v : data)
    if (v) ++n;
  return n;
}

void CoarsifyConfig::validate() const {
  require(boundary_radius_px >= 0, "coarsify: boundary radius must be >= 0");
  require(polygon_area_fraction > 0.0 && polygon_area_fraction <= 1.0,
          "coarsify: polygon area fraction must be in (0, 1]");
  require(polygon_count >= 0, "coarsify: polygon count must be >= 0");
}

std::set<int> default_exempt_classes(const ClassTaxonomy& taxonomy) {
  std::set<int> exempt;
  for (const char* name : {"water", "wall-like", "diverse-obstacle"}) {
    int idx = taxonomy.index_of(name);
    if (idx >= 0) exempt.insert(idx);
  }
  return exempt;
}

namespace {

BinaryRaster boundary_pixels(const LabelMask& mask) {
  const int h = mask.height, w = mask.width;
  BinaryRaster boundary(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int v = mask.at(y, x);
      bool edge = (x + 1 < w && mask.at(y, x + 1) != v) ||
                  (x > 0 && mask.at(y, x - 1) != v) ||
                  (y + 1 < h && mask.at(y + 1, x) != v) ||
                  (y > 0 && mask.at(y - 1, x) != v);
      boundary.at(y, x) = edge ? 1 : 0;
    }
  }
  return boundary;
}

}  // namespace

std::vector<int64_t> squared_boundary_distance(const LabelMask& mask) {
  const int h = mask.height, w = mask.width;
  BinaryRaster seed = boundary_pixels(mask);

  // Meijster et al. exact EDT. Phase 1: per-column vertical distances.
  std::vector<int64_t> g(size_t(h) * w);
  for (int x = 0; x < w; ++x) {
    g[x] = seed.at(0, x) ? 0 : kFar;
    for (int y = 1; y < h; ++y)
      g[size_t(y) * w + x] =
          seed.at(y, x) ? 0 : std::min<int64_t>(kFar, g[size_t(y - 1) * w + x] + 1);
    for (int y = h - 2; y >= 0; --y)
      g[size_t(y) * w + x] = std::min(g[size_t(y) * w + x], g[size_t(y + 1) * w + x] + 1);
  }

  // Phase 2: per-row lower envelope of parabolas x -> (x-i)^2 + g(i)^2.
  std::vector<int64_t> dist(size_t(h) * w);
  std::vector<int> s(w), t(w);
  auto f = [&g, w](int row, int x, int i) -> int64_t {
    int64_t gi = g[size_t(row) * w + i];
    int64_t dx = x - i;
    return dx * dx + gi * gi;
  };
  auto sep = [&g, w](int row, int i, int u) -> int64_t {
    int64_t gi = g[size_t(row) * w + i];
    int64_t gu = g[size_t(row) * w + u];
    return (int64_t(u) * u - int64_t(i) * i + gu * gu - gi * gi) / (2 * (u - i));
  };
  for (int y = 0; y < h; ++y) {
    int q = 0;
    s[0] = 0;
    t[0] = 0;
    for (int u = 1; u < w; ++u) {
      while (q >= 0 && f(y, t[q], s[q]) > f(y, t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
        t[0] = 0;
      } else {
        int64_t wpt = 1 + sep(y, s[q], u);
        if (wpt < w) {
          ++q;
          s[q] = u;
          t[q] = int(wpt);
        }
      }
    }
    for (int x = w - 1; x >= 0; --x) {
      dist[size_t(y) * w + x] = f(y, x, s[q]);
      if (x == t[q]) --q;
    }
  }
  return dist;
}

BinaryRaster boundary_band(const LabelMask& mask, int radius_px) {
  require(radius_px >= 0, "boundary_band: radius must be >= 0");
  std::vector<int64_t> dist = squared_boundary_distance(mask);
  BinaryRaster band(mask.height, mask.width);
  const int64_t r2 = int64_t(radius_px) * radius_px;
  for (size_t i = 0; i < dist.size(); ++i) band.data[i] = dist[i] <= r2 ? 1 : 0;
  return band;
}

namespace {

struct Point {
  double x, y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns CCW hull without repeated endpoint.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  int n = int(pts.size());
  std::vector<Point> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

BinaryRaster rasterize_hull(const std::vector<Point>& hull, int h, int w) {
  BinaryRaster out(h, w);
  if (hull.size() < 3) return out;
  double min_x = hull[0].x, max_x = hull[0].x, min_y = hull[0].y, max_y = hull[0].y;
  for (const Point& p : hull) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  int x0 = std::max(0, int(std::floor(min_x)));
  int x1 = std::min(w - 1, int(std::ceil(max_x)));
  int y0 = std::max(0, int(std::floor(min_y)));
  int y1 = std::min(h - 1, int(std::ceil(max_y)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      Point c{x + 0.5, y + 0.5};
      bool inside = true;
      for (size_t i = 0; i < hull.size() && inside; ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, c) < 0.0) inside = false;
      }
      if (inside) out.at(y, x) = 1;
    }
  }
  return out;
}

}  // namespace

BinaryRaster sample_polygon(int height, int width, double area_fraction, Rng& rng) {
  require(height > 0 && width > 0, "sample_polygon: empty raster");
  require(area_fraction > 0.0 && area_fraction <= 1.0,
          "sample_polygon: area fraction must be in (0, 1]");
  if (area_fraction == 1.0) return BinaryRaster(height, width, 1);

  const double target = area_fraction * double(height) * double(width);
  const double lo = 0.5 * target, hi = 1.5 * target;
  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    int k = int(rng.uniform_int(3, 8));
    std::vector<Point> pts(k);
    for (Point& p : pts) {
      p.x = rng.uniform(0.0, double(width));
      p.y = rng.uniform(0.0, double(height));
    }
    BinaryRaster raster = rasterize_hull(convex_hull(pts), height, width);
    double area = double(raster.count());
    if (area >= lo && area <= hi) return raster;
  }
  fail("sample_polygon: no polygon with area fraction ", area_fraction, " in ",
       kAttempts, " attempts for ", width, "x", height, " raster");
}

CoarsifyResult coarsify_mask(const LabelMask& mask, const CoarsifyConfig& cfg, Rng& rng) {
  cfg.validate();
  require(mask.provenance == Provenance::kDense,
          "coarsify_mask: input must carry dense provenance");

  BinaryRaster band = boundary_band(mask, cfg.boundary_radius_px);
  BinaryRaster keep(mask.height, mask.width);
  for (int i = 0; i < cfg.polygon_count; ++i) {
    BinaryRaster poly =
        sample_polygon(mask.height, mask.width, cfg.polygon_area_fraction, rng);
    for (size_t j = 0; j < keep.data.size(); ++j) keep.data[j] |= poly.data[j];
  }

  CoarsifyResult result{LabelMask(mask.height, mask.width, mask.taxonomy,
                                  Provenance::kCoarse),
                        0.0};
  const int ignore = mask.taxonomy.ignore_index();
  size_t labeled = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      int v = mask.at(y, x);
      if (v == ignore) continue;
      bool exempt = cfg.exempt_classes.count(v) > 0;
      if (band.at(y, x) && !(exempt && cfg.exempt_skip_band)) continue;
      if (!keep.at(y, x) && !exempt) continue;
      result.mask.at(y, x) = uint8_t(v);
      ++labeled;
    }
  }
  result.density = double(labeled) / double(mask.pixel_count());
  return result;
}

}  // namespace coarse

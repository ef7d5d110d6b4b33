#include "coarse/synthset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"
#include "coarse/rng.hpp"

namespace fs = std::filesystem;

namespace coarse {

void SynthConfig::validate() const {
  require(image_count >= 1, "synth: image count must be >= 1");
  require(height >= 16 && width >= 16, "synth: image too small");
  require(class_count >= 2 && class_count <= 9, "synth: class count must be in [2, 9]");
  require(min_blobs >= 1 && max_blobs >= min_blobs, "synth: bad blob count range");
  require(val_fraction >= 0.0 && val_fraction < 1.0, "synth: bad val fraction");
}

namespace {

struct Blob {
  int cls;
  double cx, cy, rx, ry, angle;
  int sides;  // 0 = ellipse, >=3 = convex polygon
};

bool inside_blob(const Blob& b, double x, double y) {
  double dx = x - b.cx, dy = y - b.cy;
  double ca = std::cos(b.angle), sa = std::sin(b.angle);
  double u = (dx * ca + dy * sa) / b.rx;
  double v = (-dx * sa + dy * ca) / b.ry;
  if (b.sides == 0) return u * u + v * v <= 1.0;
  // Regular convex polygon inscribed in the unit circle of (u, v).
  double apothem = std::cos(M_PI / b.sides);
  for (int k = 0; k < b.sides; ++k) {
    double phi = (2.0 * M_PI * k + M_PI) / b.sides;
    if (u * std::cos(phi) + v * std::sin(phi) > apothem) return false;
  }
  return true;
}

uint8_t jitter_channel(uint8_t base, double factor) {
  return uint8_t(std::clamp(std::lround(base * factor), long(0), long(255)));
}

}  // namespace

SynthScene generate_scene(const SynthConfig& cfg, uint64_t scene_seed,
                          const ClassTaxonomy& taxonomy) {
  Rng rng(scene_seed);
  const int h = cfg.height, w = cfg.width;
  SynthScene scene{ImageU8(h, w, 3), LabelMask(h, w, taxonomy, Provenance::kDense)};

  // Background: class 0 with a mild per-image brightness jitter.
  double bg_jitter = rng.uniform(0.85, 1.15);
  Rgb bg = taxonomy.color(0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c)
        scene.image.at(y, x, c) = jitter_channel(bg[c], bg_jitter);
      scene.labels.at(y, x) = 0;
    }
  }

  int blob_count = int(rng.uniform_int(cfg.min_blobs, cfg.max_blobs));
  const double rmin = std::min(h, w) / 6.0, rmax = std::min(h, w) / 3.0;
  for (int j = 0; j < blob_count; ++j) {
    Blob b;
    // Rotate through foreground classes so every class shows up somewhere.
    b.cls = 1 + int((scene_seed + uint64_t(j)) % uint64_t(cfg.class_count - 1));
    b.cx = rng.uniform(0.15 * w, 0.85 * w);
    b.cy = rng.uniform(0.15 * h, 0.85 * h);
    b.rx = rng.uniform(rmin, rmax);
    b.ry = rng.uniform(rmin, rmax);
    b.angle = rng.uniform(0.0, M_PI);
    b.sides = rng.uniform() < 0.5 ? 0 : int(rng.uniform_int(3, 6));
    double jitter = rng.uniform(0.8, 1.2);
    Rgb color = taxonomy.color(b.cls);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!inside_blob(b, x + 0.5, y + 0.5)) continue;
        for (int c = 0; c < 3; ++c)
          scene.image.at(y, x, c) = jitter_channel(color[c], jitter);
        scene.labels.at(y, x) = uint8_t(b.cls);
      }
    }
  }
  return scene;
}

DatasetManifest generate_synthset(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const ClassTaxonomy& taxonomy = default_taxonomy();
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "labels");

  DatasetManifest m;
  m.name = "synth";
  m.taxonomy = taxonomy;

  const int val_count = int(std::ceil(cfg.image_count * cfg.val_fraction));
  for (int i = 0; i < cfg.image_count; ++i) {
    SynthScene scene = generate_scene(cfg, Rng::derive(cfg.seed, uint64_t(i)), taxonomy);
    std::string img_path = (fs::path(out_dir) / "images" / strcat_msg("id_", i, ".png")).string();
    std::string lab_path = (fs::path(out_dir) / "labels" / strcat_msg("id_", i, ".png")).string();
    write_png(img_path, scene.image);
    save_label_png(scene.labels, lab_path);
    ImageSample s;
    s.image_path = img_path;
    s.label_path = lab_path;
    s.labeled = true;
    s.domain = DomainTag::kInDistribution;
    s.split = i < val_count ? Split::kVal : Split::kTrain;
    m.samples.push_back(std::move(s));
  }

  if (cfg.emit_ood) {
    // The OOD twin reuses the ID scene seeds so a zero hue shift reproduces
    // the ID set exactly; the shift is the whole domain gap.
    for (int i = 0; i < cfg.image_count; ++i) {
      SynthScene scene =
          generate_scene(cfg, Rng::derive(cfg.seed, uint64_t(i)), taxonomy);
      ImageU8 shifted = rotate_hue(scene.image, cfg.ood_hue_shift_deg);
      std::string img_path =
          (fs::path(out_dir) / "images" / strcat_msg("ood_", i, ".png")).string();
      std::string lab_path =
          (fs::path(out_dir) / "labels" / strcat_msg("ood_", i, ".png")).string();
      write_png(img_path, shifted);
      save_label_png(scene.labels, lab_path);
      ImageSample s;
      s.image_path = img_path;
      s.label_path = lab_path;
      s.labeled = true;
      s.domain = DomainTag::kOutOfDistribution;
      s.split = Split::kTrain;
      m.samples.push_back(std::move(s));
    }
  }

  write_manifest(m, (fs::path(out_dir) / "manifest.json").string());
  return m;
}

}  // namespace coarse

#include "coarse/dataio.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>

#include <nlohmann/json.hpp>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"
#include "coarse/rng.hpp"

namespace fs = std::filesystem;

namespace coarse {

using nlohmann::json;

std::string domain_name(DomainTag d) {
  return d == DomainTag::kInDistribution ? "id" : "ood";
}

DomainTag domain_from_name(const std::string& name) {
  if (name == "id") return DomainTag::kInDistribution;
  if (name == "ood") return DomainTag::kOutOfDistribution;
  fail("manifest: unknown domain tag '", name, "' (expected 'id' or 'ood')");
}

std::string split_name(Split s) { return s == Split::kTrain ? "train" : "val"; }

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  fail("manifest: unknown split '", name, "' (expected 'train' or 'val')");
}

std::vector<size_t> DatasetManifest::indices_of(Split split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == split) out.push_back(i);
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (size_t i = 0; i < samples.size(); ++i) {
    const ImageSample& s = samples[i];
    require(!s.image_path.empty(), "manifest: samples[", i, "].image is empty");
    require(seen.insert(s.image_path).second, "manifest: samples[", i,
            "].image duplicates path '", s.image_path, "'");
    require(!s.labeled || !s.label_path.empty(), "manifest: samples[", i,
            "].label missing while labeled=true");
  }
}

LabelLoadResult load_label_png(const std::string& path, const ClassTaxonomy& taxonomy,
                               PaletteMode mode) {
  ImageU8 img = read_png(path);
  require(img.channels == 3, "label raster '", path, "' is not RGB");

  // Class count is small; a 16M-entry LUT would be overkill, a flat map is not.
  std::map<Rgb, int> lut;
  for (int i = 0; i < taxonomy.num_classes(); ++i) lut[taxonomy.color(i)] = i;
  lut[kIgnoreColor] = taxonomy.ignore_index();

  LabelLoadResult result{LabelMask(img.height, img.width, taxonomy), 0};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      Rgb c{img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
      auto it = lut.find(c);
      if (it != lut.end()) {
        result.mask.at(y, x) = uint8_t(it->second);
      } else if (mode == PaletteMode::kLenient) {
        result.mask.at(y, x) = uint8_t(taxonomy.ignore_index());
        ++result.unmatched_pixels;
      } else {
        fail("label raster '", path, "': color (", int(c[0]), ",", int(c[1]), ",",
             int(c[2]), ") at (", x, ",", y, ") not in taxonomy '", taxonomy.name(),
             "'");
      }
    }
  }
  return result;
}

void save_label_png(const LabelMask& mask, const std::string& path) {
  mask.validate();
  ImageU8 img(mask.height, mask.width, 3);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      Rgb c = mask.is_ignore(y, x) ? kIgnoreColor : mask.taxonomy.color(mask.at(y, x));
      img.at(y, x, 0) = c[0];
      img.at(y, x, 1) = c[1];
      img.at(y, x, 2) = c[2];
    }
  }
  write_png(path, img);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "manifest: cannot open '", path, "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail("manifest '", path, "': invalid JSON: ", e.what());
  }
  DatasetManifest m;
  require(j.contains("name"), "manifest '", path, "': missing field 'name'");
  require(j.contains("taxonomy"), "manifest '", path, "': missing field 'taxonomy'");
  require(j.contains("samples"), "manifest '", path, "': missing field 'samples'");
  m.name = j["name"].get<std::string>();
  m.taxonomy = taxonomy_from_json(j["taxonomy"].dump());
  for (size_t i = 0; i < j["samples"].size(); ++i) {
    const json& s = j["samples"][i];
    ImageSample sample;
    require(s.contains("image"), "manifest '", path, "': samples[", i,
            "].image missing");
    sample.image_path = s["image"].get<std::string>();
    sample.label_path = s.value("label", "");
    require(s.contains("domain"), "manifest '", path, "': samples[", i,
            "].domain missing");
    sample.domain = domain_from_name(s["domain"].get<std::string>());
    require(s.contains("split"), "manifest '", path, "': samples[", i,
            "].split missing");
    sample.split = split_from_name(s["split"].get<std::string>());
    sample.labeled = s.value("labeled", !sample.label_path.empty());
    m.samples.push_back(std::move(sample));
  }
  m.validate();
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  manifest.validate();
  json j;
  j["name"] = manifest.name;
  j["taxonomy"] = json::parse(taxonomy_to_json(manifest.taxonomy));
  j["samples"] = json::array();
  for (const ImageSample& s : manifest.samples) {
    json e;
    e["image"] = s.image_path;
    if (!s.label_path.empty()) e["label"] = s.label_path;
    e["domain"] = domain_name(s.domain);
    e["split"] = split_name(s.split);
    e["labeled"] = s.labeled;
    j["samples"].push_back(e);
  }
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "manifest: cannot open '", path, "' for writing");
  f << j.dump(2) << "\n";
  require(f.good(), "manifest: write failed for '", path, "'");
}

namespace {

DatasetManifest paired_tree_manifest(const std::string& name,
                                     const ClassTaxonomy& taxonomy,
                                     const std::vector<std::pair<fs::path, fs::path>>& dirs) {
  DatasetManifest m;
  m.name = name;
  m.taxonomy = taxonomy;
  for (const auto& [img_dir, lab_dir] : dirs) {
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(img_dir))
      if (entry.is_regular_file()) images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    for (const fs::path& img : images) {
      ImageSample s;
      s.image_path = img.string();
      fs::path label = lab_dir / (img.stem().string() + ".png");
      if (fs::exists(label)) {
        s.label_path = label.string();
        s.labeled = true;
      }
      m.samples.push_back(std::move(s));
    }
  }
  require(!m.samples.empty(), "dataset adapter: no images found for '", name, "'");
  m.validate();
  return m;
}

}  // namespace

DatasetManifest rugd_style_manifest(const std::string& frames_root,
                                    const std::string& annotations_root,
                                    const ClassTaxonomy& taxonomy,
                                    const std::string& name) {
  require(fs::is_directory(frames_root), "rugd adapter: '", frames_root,
          "' is not a directory");
  std::vector<std::pair<fs::path, fs::path>> dirs;
  std::vector<fs::path> scenes;
  for (const auto& entry : fs::directory_iterator(frames_root))
    if (entry.is_directory()) scenes.push_back(entry.path());
  std::sort(scenes.begin(), scenes.end());
  if (scenes.empty()) {
    dirs.emplace_back(frames_root, annotations_root);
  } else {
    for (const fs::path& scene : scenes)
      dirs.emplace_back(scene, fs::path(annotations_root) / scene.filename());
  }
  return paired_tree_manifest(name, taxonomy, dirs);
}

DatasetManifest rellis_style_manifest(const std::string& root,
                                      const ClassTaxonomy& taxonomy,
                                      const std::string& name) {
  require(fs::is_directory(root), "rellis adapter: '", root, "' is not a directory");
  std::vector<std::pair<fs::path, fs::path>> dirs;
  std::vector<fs::path> sequences;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) sequences.push_back(entry.path());
  std::sort(sequences.begin(), sequences.end());
  for (const fs::path& seq : sequences) {
    fs::path img_dir = seq / "pylon_camera_node";
    fs::path lab_dir = seq / "pylon_camera_node_label_color";
    if (fs::is_directory(img_dir)) dirs.emplace_back(img_dir, lab_dir);
  }
  require(!dirs.empty(), "rellis adapter: no '<seq>/pylon_camera_node' directories under '",
          root, "'");
  return paired_tree_manifest(name, taxonomy, dirs);
}

namespace {

struct Component {
  std::vector<std::pair<int, int>> pixels;  // (y, x)
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

std::vector<Component> connected_components(const LabelMask& mask,
                                            const std::set<int>& classes) {
  std::vector<uint8_t> visited(mask.pixel_count(), 0);
  std::vector<Component> comps;
  const int h = mask.height, w = mask.width;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      size_t idx0 = size_t(y0) * w + x0;
      if (visited[idx0]) continue;
      int cls = mask.at(y0, x0);
      if (!classes.count(cls)) continue;
      Component comp;
      comp.min_x = comp.max_x = x0;
      comp.min_y = comp.max_y = y0;
      std::queue<std::pair<int, int>> frontier;
      frontier.emplace(y0, x0);
      visited[idx0] = 1;
      while (!frontier.empty()) {
        auto [y, x] = frontier.front();
        frontier.pop();
        comp.pixels.emplace_back(y, x);
        comp.min_x = std::min(comp.min_x, x);
        comp.max_x = std::max(comp.max_x, x);
        comp.min_y = std::min(comp.min_y, y);
        comp.max_y = std::max(comp.max_y, y);
        const int dy[4] = {-1, 1, 0, 0};
        const int dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          size_t nidx = size_t(ny) * w + nx;
          if (visited[nidx] || mask.at(ny, nx) != cls) continue;
          visited[nidx] = 1;
          frontier.emplace(ny, nx);
        }
      }
      comps.push_back(std::move(comp));
    }
  }
  return comps;
}

}  // namespace

PastedScene cut_and_paste(const ImageSample& donor, const ImageSample& host,
                          const std::set<int>& classes, const ClassTaxonomy& taxonomy,
                          uint64_t rng_seed) {
  require(!classes.empty(), "cut_and_paste: empty class set");
  require(donor.labeled && !donor.label_path.empty(),
          "cut_and_paste: donor sample is not labeled");

  ImageU8 donor_img = read_png(donor.image_path);
  LabelMask donor_mask = load_label_png(donor.label_path, taxonomy).mask;
  require(donor_img.height == donor_mask.height && donor_img.width == donor_mask.width,
          "cut_and_paste: donor image/label dimensions differ");

  ImageU8 host_img = read_png(host.image_path);
  LabelMask host_mask = host.labeled
                            ? load_label_png(host.label_path, taxonomy).mask
                            : LabelMask(host_img.height, host_img.width, taxonomy);
  require(host_img.height == host_mask.height && host_img.width == host_mask.width,
          "cut_and_paste: host image/label dimensions differ");

  std::vector<Component> comps = connected_components(donor_mask, classes);
  if (comps.empty()) {
    std::string names;
    for (int c : classes) {
      if (!names.empty()) names += ", ";
      names += taxonomy.class_name(c);
    }
    fail("cut_and_paste: donor has no pixels of requested classes {", names, "}");
  }

  Rng rng(rng_seed);
  PastedScene out{host_img, host_mask, 0};
  out.labels.provenance = Provenance::kAugmented;
  const int hh = host_img.height, hw = host_img.width;
  for (const Component& comp : comps) {
    int cx = (comp.min_x + comp.max_x) / 2;
    int cy = (comp.min_y + comp.max_y) / 2;
    int tx = int(rng.uniform_int(0, hw - 1));
    int ty = int(rng.uniform_int(0, hh - 1));
    int dx = tx - cx, dy = ty - cy;
    for (const auto& [y, x] : comp.pixels) {
      int ny = y + dy, nx = x + dx;
      if (ny < 0 || ny >= hh || nx < 0 || nx >= hw) continue;
      for (int c = 0; c < 3; ++c) out.image.at(ny, nx, c) = donor_img.at(y, x, c);
      out.labels.at(ny, nx) = donor_mask.at(y, x);
      ++out.pasted_pixels;
    }
  }
  return out;
}

}  // namespace coarse

#include "coarse/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "coarse/dataio.hpp"
#include "coarse/error.hpp"
#include "coarse/mask.hpp"

namespace coarse {
namespace {

using nlohmann::json;

std::string to_hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

Rgb from_hex(const std::string& s) {
  require(s.size() == 7 && s[0] == '#', "taxonomy: bad hex color '", s, "'");
  auto nibble = [&s](size_t i) -> int {
    char c = static_cast<char>(std::tolower(s[i]));
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    fail("taxonomy: bad hex color '", s, "'");
  };
  return Rgb{uint8_t(nibble(1) * 16 + nibble(2)), uint8_t(nibble(3) * 16 + nibble(4)),
             uint8_t(nibble(5) * 16 + nibble(6))};
}

// Distinct placeholder palette for source datasets whose official colors are
// not part of this project; real label files come with their own palette
// config anyway.
std::vector<Rgb> spaced_palette(size_t n) {
  std::vector<Rgb> colors;
  colors.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    double h = 360.0 * double(i) / double(n);
    double s = 0.72, v = 0.92;
    double c = v * s;
    double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
    double m = v - c;
    double r = 0, g = 0, b = 0;
    if (h < 60)       { r = c; g = x; }
    else if (h < 120) { r = x; g = c; }
    else if (h < 180) { g = c; b = x; }
    else if (h < 240) { g = x; b = c; }
    else if (h < 300) { r = x; b = c; }
    else              { r = c; b = x; }
    colors.push_back(Rgb{uint8_t(std::lround((r + m) * 255)),
                         uint8_t(std::lround((g + m) * 255)),
                         uint8_t(std::lround((b + m) * 255))});
  }
  return colors;
}

}  // namespace

ClassTaxonomy::ClassTaxonomy(std::string name, std::vector<std::string> class_names,
                             std::vector<Rgb> colors, int ignore_index)
    : name_(std::move(name)), names_(std::move(class_names)),
      colors_(std::move(colors)), ignore_index_(ignore_index) {
  require(!names_.empty(), "taxonomy '", name_, "': empty class list");
  require(names_.size() == colors_.size(), "taxonomy '", name_,
          "': class/color count mismatch");
  require(ignore_index_ < 0 || ignore_index_ >= static_cast<int>(names_.size()),
          "taxonomy '", name_, "': ignore_index ", ignore_index_,
          " collides with class range");
  std::set<std::string> seen_names;
  std::set<Rgb> seen_colors;
  for (size_t i = 0; i < names_.size(); ++i) {
    require(seen_names.insert(names_[i]).second, "taxonomy '", name_,
            "': duplicate class name '", names_[i], "'");
    require(seen_colors.insert(colors_[i]).second, "taxonomy '", name_,
            "': duplicate color for class '", names_[i], "'");
    require(colors_[i] != kIgnoreColor, "taxonomy '", name_, "': class '", names_[i],
            "' uses the reserved ignore color (0,0,0)");
  }
}

const std::string& ClassTaxonomy::class_name(int index) const {
  require(index >= 0 && index < num_classes(), "taxonomy '", name_,
          "': class index ", index, " out of range");
  return names_[index];
}

Rgb ClassTaxonomy::color(int index) const {
  require(index >= 0 && index < num_classes(), "taxonomy '", name_,
          "': class index ", index, " out of range");
  return colors_[index];
}

int ClassTaxonomy::index_of(const std::string& class_name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == class_name) return static_cast<int>(i);
  return -1;
}

int ClassTaxonomy::index_of_color(const Rgb& color) const {
  for (size_t i = 0; i < colors_.size(); ++i)
    if (colors_[i] == color) return static_cast<int>(i);
  return -1;
}

const ClassTaxonomy& default_taxonomy() {
  static const ClassTaxonomy t(
      "offroad9",
      {"ground", "trail", "grass", "water", "sky", "dry_vege", "lush_vege",
       "wall-like", "diverse-obstacle"},
      {Rgb{139, 69, 19}, Rgb{105, 105, 105}, Rgb{34, 139, 34}, Rgb{30, 144, 255},
       Rgb{135, 206, 235}, Rgb{222, 184, 135}, Rgb{0, 100, 0}, Rgb{139, 0, 0},
       Rgb{255, 140, 0}});
  return t;
}

const ClassTaxonomy& rellis3d_taxonomy() {
  static const ClassTaxonomy t = [] {
    std::vector<std::string> names = {
        "dirt", "mud", "asphalt", "concrete", "grass", "water", "puddle", "sky",
        "bush", "tree", "building", "fence", "barrier", "pole", "vehicle",
        "object", "person", "log", "rubble"};
    return ClassTaxonomy("rellis3d", names, spaced_palette(names.size()));
  }();
  return t;
}

const ClassTaxonomy& rugd_taxonomy() {
  static const ClassTaxonomy t = [] {
    std::vector<std::string> names = {
        "dirt", "sand", "mulch", "rock-bed", "asphalt", "gravel", "concrete",
        "grass", "water", "sky", "bush", "tree", "building", "fence", "bridge",
        "pole", "vehicle", "object", "sign", "rock", "picnic-table", "bicycle",
        "person", "log"};
    return ClassTaxonomy("rugd", names, spaced_palette(names.size()));
  }();
  return t;
}

ClassMapping::ClassMapping(ClassTaxonomy source, ClassTaxonomy target,
                           std::vector<int> target_of_source)
    : source_(std::move(source)), target_(std::move(target)),
      target_of_source_(std::move(target_of_source)) {
  require(static_cast<int>(target_of_source_.size()) == source_.num_classes(),
          "class mapping: table size does not cover source taxonomy '",
          source_.name(), "'");
  for (size_t i = 0; i < target_of_source_.size(); ++i)
    require(target_of_source_[i] >= 0 && target_of_source_[i] < target_.num_classes(),
            "class mapping: target index for '", source_.class_name(int(i)),
            "' out of range");
}

int ClassMapping::map(int source_index) const {
  require(source_index >= 0 && source_index < source_.num_classes(),
          "class mapping: source index ", source_index, " out of range");
  return target_of_source_[source_index];
}

ClassMapping ClassMapping::then(const ClassMapping& next) const {
  require(target_ == next.source(),
          "class mapping composition: intermediate taxonomies differ");
  std::vector<int> composed(target_of_source_.size());
  for (size_t i = 0; i < composed.size(); ++i)
    composed[i] = next.map(target_of_source_[i]);
  return ClassMapping(source_, next.target(), composed);
}

ClassMapping build_mapping(const std::vector<std::pair<std::string, std::string>>& pairs,
                           const ClassTaxonomy& src, const ClassTaxonomy& dst) {
  std::vector<int> table(src.num_classes(), -1);
  for (const auto& [s, t] : pairs) {
    int si = src.index_of(s);
    require(si >= 0, "build_mapping: unknown source class '", s, "' for taxonomy '",
            src.name(), "'");
    int ti = dst.index_of(t);
    require(ti >= 0, "build_mapping: unknown target class '", t, "' for taxonomy '",
            dst.name(), "'");
    require(table[si] < 0, "build_mapping: duplicate source key '", s, "'");
    table[si] = ti;
  }
  for (int i = 0; i < src.num_classes(); ++i)
    require(table[i] >= 0, "build_mapping: source class '", src.class_name(i),
            "' has no mapping");
  return ClassMapping(src, dst, table);
}

ClassMapping identity_mapping(const ClassTaxonomy& taxonomy) {
  std::vector<int> table(taxonomy.num_classes());
  for (int i = 0; i < taxonomy.num_classes(); ++i) table[i] = i;
  return ClassMapping(taxonomy, taxonomy, table);
}

namespace {

const std::vector<std::pair<std::string, std::string>>& rellis3d_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"dirt", "ground"},      {"mud", "ground"},
      {"asphalt", "trail"},    {"concrete", "trail"},
      {"grass", "grass"},
      {"water", "water"},      {"puddle", "water"},
      {"sky", "sky"},
      {"bush", "dry_vege"},
      {"tree", "lush_vege"},
      {"building", "wall-like"}, {"fence", "wall-like"}, {"barrier", "wall-like"},
      {"pole", "diverse-obstacle"},   {"vehicle", "diverse-obstacle"},
      {"object", "diverse-obstacle"}, {"person", "diverse-obstacle"},
      {"log", "diverse-obstacle"},    {"rubble", "diverse-obstacle"}};
  return pairs;
}

const std::vector<std::pair<std::string, std::string>>& rugd_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"dirt", "ground"}, {"sand", "ground"}, {"mulch", "ground"},
      {"rock-bed", "ground"},
      {"asphalt", "trail"}, {"gravel", "trail"}, {"concrete", "trail"},
      {"grass", "grass"},
      {"water", "water"},
      {"sky", "sky"},
      {"bush", "dry_vege"},
      {"tree", "lush_vege"},
      {"building", "wall-like"}, {"fence", "wall-like"}, {"bridge", "wall-like"},
      {"pole", "diverse-obstacle"},   {"vehicle", "diverse-obstacle"},
      {"object", "diverse-obstacle"}, {"sign", "diverse-obstacle"},
      {"rock", "diverse-obstacle"},   {"picnic-table", "diverse-obstacle"},
      {"bicycle", "diverse-obstacle"}, {"person", "diverse-obstacle"},
      {"log", "diverse-obstacle"}};
  return pairs;
}

}  // namespace

ClassMapping rellis3d_mapping() {
  return build_mapping(rellis3d_pairs(), rellis3d_taxonomy(), default_taxonomy());
}

ClassMapping rugd_mapping() {
  return build_mapping(rugd_pairs(), rugd_taxonomy(), default_taxonomy());
}

LabelMask remap_mask(const LabelMask& mask, const ClassMapping& mapping) {
  const int ignore_in = mask.taxonomy.ignore_index();
  const int ignore_out = mapping.target().ignore_index();
  LabelMask out(mask.height, mask.width, mapping.target(), mask.provenance);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      int v = mask.at(y, x);
      if (v == ignore_in) {
        out.at(y, x) = uint8_t(ignore_out);
        continue;
      }
      require(v >= 0 && v < mapping.source().num_classes(),
              "remap_mask: out-of-range index ", v, " at pixel (", x, ",", y, ")");
      out.at(y, x) = uint8_t(mapping.map(v));
    }
  }
  return out;
}

ClassFrequencyTable class_frequencies(const DatasetManifest& manifest) {
  require(!manifest.samples.empty(), "class_frequencies: empty dataset");
  const ClassTaxonomy& taxonomy = manifest.taxonomy;
  std::vector<uint64_t> counts(taxonomy.num_classes(), 0);
  uint64_t total = 0;
  for (const ImageSample& sample : manifest.samples) {
    if (!sample.labeled) continue;
    LabelMask mask = load_label_png(sample.label_path, taxonomy).mask;
    for (uint8_t v : mask.data) {
      if (v == taxonomy.ignore_index()) continue;
      require(v < counts.size(), "class_frequencies: label ", int(v),
              " out of range in '", sample.label_path, "'");
      ++counts[v];
      ++total;
    }
  }
  require(total > 0, "class_frequencies: no labeled pixels in dataset '",
          manifest.name, "'");
  ClassFrequencyTable table;
  table.labeled_pixels = total;
  table.fractions.resize(counts.size());
  for (size_t i = 0; i < counts.size(); ++i)
    table.fractions[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return table;
}

ClassFrequencyTable rellis3d_class_frequencies() {
  ClassFrequencyTable t;
  t.fractions = {0.0286, 0.0106, 0.3359, 0.0065, 0.3002,
                 0.1583, 0.1503, 0.0050, 0.0046};
  return t;
}

ClassFrequencyTable rugd_class_frequencies() {
  ClassFrequencyTable t;
  t.fractions = {0.1171, 0.1095, 0.2385, 0.0011, 0.0822,
                 0.0237, 0.3933, 0.0202, 0.0145};
  return t;
}

std::string taxonomy_to_json(const ClassTaxonomy& taxonomy) {
  json j;
  j["name"] = taxonomy.name();
  j["ignore_index"] = taxonomy.ignore_index();
  j["classes"] = json::array();
  for (int i = 0; i < taxonomy.num_classes(); ++i)
    j["classes"].push_back({{"name", taxonomy.class_name(i)},
                            {"color", to_hex(taxonomy.color(i))}});
  return j.dump(2);
}

ClassTaxonomy taxonomy_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail("taxonomy: invalid JSON: ", e.what());
  }
  require(j.contains("name") && j.contains("classes"),
          "taxonomy: missing 'name' or 'classes' field");
  std::vector<std::string> names;
  std::vector<Rgb> colors;
  for (const auto& c : j["classes"]) {
    names.push_back(c.at("name").get<std::string>());
    colors.push_back(from_hex(c.at("color").get<std::string>()));
  }
  int ignore = j.value("ignore_index", kIgnoreIndex);
  return ClassTaxonomy(j["name"].get<std::string>(), names, colors, ignore);
}

std::string mapping_to_json(const ClassMapping& mapping) {
  json j;
  j["source"] = json::parse(taxonomy_to_json(mapping.source()));
  j["target"] = json::parse(taxonomy_to_json(mapping.target()));
  j["pairs"] = json::array();
  for (int i = 0; i < mapping.source().num_classes(); ++i)
    j["pairs"].push_back({mapping.source().class_name(i),
                          mapping.target().class_name(mapping.map(i))});
  return j.dump(2);
}

ClassMapping mapping_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail("mapping: invalid JSON: ", e.what());
  }
  ClassTaxonomy src = taxonomy_from_json(j.at("source").dump());
  ClassTaxonomy dst = taxonomy_from_json(j.at("target").dump());
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : j.at("pairs"))
    pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return build_mapping(pairs, src, dst);
}

}  // namespace coarse

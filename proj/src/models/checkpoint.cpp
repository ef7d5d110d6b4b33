#include "coarse/models/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "coarse/error.hpp"

namespace coarse {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'A', 'R', 'S', 'E', 'C', 'K'};
constexpr uint32_t kFormatVersion = 1;

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json encoder_config_json(const ViTConfig& cfg) {
  return json{{"patch_size", cfg.patch_size}, {"dim", cfg.dim},
              {"depth", cfg.depth},           {"heads", cfg.heads},
              {"mlp_ratio", cfg.mlp_ratio},   {"pos_grid", cfg.pos_grid},
              {"seed", cfg.seed}};
}

ViTConfig encoder_config_from_json(const json& j) {
  ViTConfig cfg;
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.dim = j.at("dim").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.mlp_ratio = j.at("mlp_ratio").get<int>();
  cfg.pos_grid = j.at("pos_grid").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

json pixel_config_json(const PixelDecoderConfig& cfg) {
  return json{{"encoder_dim", cfg.encoder_dim},
              {"num_classes", cfg.num_classes},
              {"proj_channels", cfg.proj_channels},
              {"fused_channels", cfg.fused_channels},
              {"compressed_channels", cfg.compressed_channels},
              {"skip_kernels", cfg.skip_kernels},
              {"skip_branch_channels", cfg.skip_branch_channels},
              {"skip_fused_channels", cfg.skip_fused_channels},
              {"late_kernel", cfg.late_kernel},
              {"late_channels", cfg.late_channels},
              {"seed", cfg.seed}};
}

PixelDecoderConfig pixel_config_from_json(const json& j) {
  PixelDecoderConfig cfg;
  cfg.encoder_dim = j.at("encoder_dim").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  auto proj = j.at("proj_channels").get<std::vector<int>>();
  require(proj.size() == 4, "checkpoint: bad projection channel list");
  std::copy(proj.begin(), proj.end(), cfg.proj_channels.begin());
  cfg.fused_channels = j.at("fused_channels").get<int>();
  cfg.compressed_channels = j.at("compressed_channels").get<int>();
  cfg.skip_kernels = j.at("skip_kernels").get<std::vector<int>>();
  cfg.skip_branch_channels = j.at("skip_branch_channels").get<int>();
  cfg.skip_fused_channels = j.at("skip_fused_channels").get<int>();
  cfg.late_kernel = j.at("late_kernel").get<int>();
  cfg.late_channels = j.at("late_channels").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

json patch_config_json(const PatchDecoderConfig& cfg) {
  return json{{"encoder_dim", cfg.encoder_dim}, {"num_classes", cfg.num_classes},
              {"depth", cfg.depth},             {"heads", cfg.heads},
              {"mlp_ratio", cfg.mlp_ratio},     {"seed", cfg.seed}};
}

PatchDecoderConfig patch_config_from_json(const json& j) {
  PatchDecoderConfig cfg;
  cfg.encoder_dim = j.at("encoder_dim").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.mlp_ratio = j.at("mlp_ratio").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

void write_container(const std::string& path, json header, const NamedTensors& tensors) {
  header["format_version"] = kFormatVersion;
  json dir = json::array();
  uint64_t count = 0;
  for (const auto& [name, var] : tensors) {
    dir.push_back({{"name", name}, {"shape", var->value.shape},
                   {"count", var->value.numel()}});
    count += var->value.numel();
  }
  header["tensors"] = dir;
  std::string htext = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "checkpoint: cannot open '", path, "' for writing");
  f.write(kMagic, 8);
  uint32_t ver = kFormatVersion;
  uint32_t hlen = uint32_t(htext.size());
  f.write(reinterpret_cast<const char*>(&ver), 4);
  f.write(reinterpret_cast<const char*>(&hlen), 4);
  f.write(htext.data(), std::streamsize(htext.size()));
  for (const auto& [name, var] : tensors)
    f.write(reinterpret_cast<const char*>(var->value.data.data()),
            std::streamsize(var->value.data.size() * sizeof(double)));
  require(f.good(), "checkpoint: write failed for '", path, "'");
}

json read_container(const std::string& path, std::vector<double>& blob) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "checkpoint: cannot open '", path, "'");
  char magic[8];
  f.read(magic, 8);
  require(f.good() && std::memcmp(magic, kMagic, 8) == 0,
          "checkpoint: '", path, "' is not a checkpoint container");
  uint32_t ver = 0, hlen = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  f.read(reinterpret_cast<char*>(&hlen), 4);
  require(f.good() && ver == kFormatVersion, "checkpoint: unsupported version ", ver);
  std::string htext(hlen, '\0');
  f.read(htext.data(), hlen);
  require(f.good(), "checkpoint: truncated header in '", path, "'");
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    fail("checkpoint: corrupt header in '", path, "': ", e.what());
  }
  uint64_t total = 0;
  for (const auto& t : header.at("tensors")) total += t.at("count").get<uint64_t>();
  blob.resize(total);
  f.read(reinterpret_cast<char*>(blob.data()), std::streamsize(total * sizeof(double)));
  require(f.good(), "checkpoint: truncated tensor data in '", path, "'");
  return header;
}

void fill_weights(const NamedTensors& tensors, const json& header,
                  const std::vector<double>& blob, const std::string& path) {
  const json& dir = header.at("tensors");
  require(dir.size() == tensors.size(), "checkpoint: '", path, "' tensor count ",
          dir.size(), " != model tensor count ", tensors.size());
  size_t off = 0;
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, var] = tensors[i];
    require(dir[i].at("name").get<std::string>() == name, "checkpoint: '", path,
            "' tensor ", i, " named '", dir[i].at("name").get<std::string>(),
            "', model expects '", name, "'");
    auto shape = dir[i].at("shape").get<std::vector<int>>();
    require(shape == var->value.shape, "checkpoint: shape mismatch for '", name, "'");
    std::copy(blob.begin() + off, blob.begin() + off + var->value.data.size(),
              var->value.data.begin());
    off += var->value.data.size();
  }
}

}  // namespace

uint64_t fnv1a_hash(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void save_checkpoint(const SegModel& model, const std::string& path) {
  json header;
  header["kind"] = "seg_model";
  header["arch_hash"] = hash_hex(fnv1a_hash(model.arch_canonical()));
  header["decoder_kind"] = decoder_kind_name(model.kind());
  header["taxonomy"] = json::parse(taxonomy_to_json(model.taxonomy()));
  header["encoder"] = encoder_config_json(model.encoder().config());
  if (model.kind() == DecoderKind::kPixel)
    header["decoder"] = pixel_config_json(model.pixel_decoder()->config());
  else
    header["decoder"] = patch_config_json(model.patch_decoder()->config());
  write_container(path, std::move(header), model.named_weights());
}

SegModel load_checkpoint(const std::string& path) {
  std::vector<double> blob;
  json header = read_container(path, blob);
  require(header.value("kind", "") == "seg_model",
          "checkpoint: '", path, "' is not a model checkpoint");

  ClassTaxonomy taxonomy = taxonomy_from_json(header.at("taxonomy").dump());
  auto encoder = std::make_shared<ViTEncoder>(
      encoder_config_from_json(header.at("encoder")));
  DecoderKind kind = decoder_kind_from_name(header.at("decoder_kind").get<std::string>());

  SegModel model = [&] {
    if (kind == DecoderKind::kPixel) {
      auto dec = std::make_shared<PixelDecoder>(
          pixel_config_from_json(header.at("decoder")));
      return SegModel(encoder, dec, taxonomy);
    }
    auto dec = std::make_shared<PatchDecoder>(
        patch_config_from_json(header.at("decoder")));
    return SegModel(encoder, dec, taxonomy);
  }();

  std::string expect = hash_hex(fnv1a_hash(model.arch_canonical()));
  std::string stored = header.at("arch_hash").get<std::string>();
  require(stored == expect, "checkpoint: '", path, "' arch hash ", stored,
          " does not match rebuilt architecture ", expect, "; refusing to load");
  fill_weights(model.named_weights(), header, blob, path);
  return model;
}

void save_encoder(const ViTEncoder& encoder, const std::string& path) {
  json header;
  header["kind"] = "encoder";
  header["arch_hash"] = hash_hex(fnv1a_hash(encoder.config().canonical()));
  header["encoder"] = encoder_config_json(encoder.config());
  write_container(path, std::move(header), encoder.named_weights());
}

std::shared_ptr<ViTEncoder> load_encoder(const std::string& path) {
  std::vector<double> blob;
  json header = read_container(path, blob);
  require(header.value("kind", "") == "encoder",
          "checkpoint: '", path, "' is not an encoder container");
  auto encoder =
      std::make_shared<ViTEncoder>(encoder_config_from_json(header.at("encoder")));
  std::string expect = hash_hex(fnv1a_hash(encoder->config().canonical()));
  require(header.at("arch_hash").get<std::string>() == expect,
          "checkpoint: '", path, "' encoder hash mismatch; refusing to load");
  fill_weights(encoder->named_weights(), header, blob, path);
  return encoder;
}

}  // namespace coarse

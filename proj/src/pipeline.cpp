#include "coarse/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"
#include "coarse/models/checkpoint.hpp"
#include "coarse/pseudo.hpp"
#include "coarse/select.hpp"
#include "coarse/version.hpp"

namespace fs = std::filesystem;

namespace coarse {

using nlohmann::json;

std::string data_config_name(DataConfig d) {
  switch (d) {
    case DataConfig::kCoarseId: return "coarse_id";
    case DataConfig::kDenseOod: return "dense_ood";
    case DataConfig::kCoarseIdWithDenseOod: return "coarse_id_with_dense_ood";
  }
  fail("unknown data config");
}

DataConfig data_config_from_name(const std::string& name) {
  if (name == "coarse_id") return DataConfig::kCoarseId;
  if (name == "dense_ood") return DataConfig::kDenseOod;
  if (name == "coarse_id_with_dense_ood") return DataConfig::kCoarseIdWithDenseOod;
  fail("unknown data config '", name, "'");
}

void PipelineConfig::validate() const {
  require(!id_manifest_path.empty(), "pipeline: id manifest path missing");
  require(!out_root.empty(), "pipeline: output root missing");
  require(subset_k >= 1, "pipeline: subset size must be >= 1");
  require(epochs_mixed >= 1 && epochs_coarse_only >= 1, "pipeline: bad epoch counts");
  coarsify.validate();
  bool needs_ood = model_a.data != DataConfig::kCoarseId ||
                   model_b.data != DataConfig::kCoarseId;
  require(!needs_ood || !ood_manifest_path.empty(),
          "pipeline: a model uses dense OOD data but no OOD manifest is set");
}

namespace {

json train_template_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"crop", {t.crop_h, t.crop_w}},
              {"full_res", {t.full_h, t.full_w}},
              {"crop_phase_fraction", t.crop_phase_fraction},
              {"weight_mode", weight_mode_name(t.weight_mode)},
              {"batch_size", t.batch_size},
              {"scale_range", {t.scale_min, t.scale_max}},
              {"eval_interval", t.eval_interval}};
}

TrainConfig train_template_from_json(const json& j) {
  TrainConfig t;
  t.learning_rate = j.value("learning_rate", 1e-3);
  if (j.contains("crop")) {
    t.crop_h = j["crop"].at(0).get<int>();
    t.crop_w = j["crop"].at(1).get<int>();
  }
  if (j.contains("full_res")) {
    t.full_h = j["full_res"].at(0).get<int>();
    t.full_w = j["full_res"].at(1).get<int>();
  }
  t.crop_phase_fraction = j.value("crop_phase_fraction", 0.9);
  t.weight_mode = weight_mode_from_name(j.value("weight_mode", "uniform"));
  t.batch_size = j.value("batch_size", 8);
  if (j.contains("scale_range")) {
    t.scale_min = j["scale_range"].at(0).get<double>();
    t.scale_max = j["scale_range"].at(1).get<double>();
  }
  t.eval_interval = j.value("eval_interval", 0);
  return t;
}

}  // namespace

PipelineConfig pipeline_config_from_json_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "pipeline config: cannot open '", path, "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail("pipeline config '", path, "': invalid JSON: ", e.what());
  }
  PipelineConfig cfg;
  cfg.id_manifest_path = j.value("id_manifest", "");
  cfg.ood_manifest_path = j.value("ood_manifest", "");
  if (j.contains("coarsify")) {
    const json& c = j["coarsify"];
    cfg.coarsify.boundary_radius_px = c.value("radius", 7);
    cfg.coarsify.polygon_area_fraction = c.value("area_fraction", 0.1);
    cfg.coarsify.polygon_count = c.value("polygons", 3);
    cfg.coarsify.exempt_skip_band = c.value("exempt_skip_band", false);
    if (c.contains("exempt_classes")) {
      for (const auto& name : c["exempt_classes"]) {
        int idx = default_taxonomy().index_of(name.get<std::string>());
        require(idx >= 0, "pipeline config: unknown exempt class '",
                name.get<std::string>(), "'");
        cfg.coarsify.exempt_classes.insert(idx);
      }
    } else {
      cfg.coarsify.exempt_classes = default_exempt_classes(default_taxonomy());
    }
  } else {
    cfg.coarsify.exempt_classes = default_exempt_classes(default_taxonomy());
  }
  cfg.subset_k = j.value("subset_k", 300);
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    if (e.contains("path")) {
      cfg.encoder_path = e["path"].get<std::string>();
    } else {
      cfg.encoder_cfg.patch_size = e.value("patch_size", 7);
      cfg.encoder_cfg.dim = e.value("dim", 32);
      cfg.encoder_cfg.depth = e.value("depth", 2);
      cfg.encoder_cfg.heads = e.value("heads", pick_head_count(cfg.encoder_cfg.dim));
      cfg.encoder_cfg.mlp_ratio = e.value("mlp_ratio", 4);
      cfg.encoder_cfg.pos_grid = e.value("pos_grid", 16);
      cfg.encoder_cfg.seed = e.value("seed", uint64_t(1));
    }
  }
  std::string pairing = j.value("pairing", "pixel-patch");
  auto dash = pairing.find('-');
  require(dash != std::string::npos, "pipeline config: bad pairing '", pairing, "'");
  cfg.model_a.kind = decoder_kind_from_name(pairing.substr(0, dash));
  cfg.model_b.kind = decoder_kind_from_name(pairing.substr(dash + 1));
  cfg.model_a.data =
      data_config_from_name(j.value("data_a", "coarse_id_with_dense_ood"));
  cfg.model_b.data = data_config_from_name(j.value("data_b", "coarse_id"));
  if (j.contains("retrain"))
    cfg.retrain_kind = decoder_kind_from_name(j["retrain"].get<std::string>());
  cfg.retrain_union = j.value("retrain_union", false);
  if (j.contains("train")) cfg.train_template = train_template_from_json(j["train"]);
  cfg.epochs_mixed = j.value("epochs_mixed", 200);
  cfg.epochs_coarse_only = j.value("epochs_coarse_only", 500);
  cfg.seed = j.value("seed", uint64_t(0));
  cfg.out_root = j.value("out", "");
  return cfg;
}

TrainJobConfig train_job_from_json_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "train config: cannot open '", path, "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail("train config '", path, "': invalid JSON: ", e.what());
  }
  TrainJobConfig job;
  job.train = train_template_from_json(j);
  job.train.epochs = j.value("epochs", 200);
  job.train.seed = j.value("seed", uint64_t(0));
  require(j.contains("data_mix"), "train config: missing 'data_mix'");
  for (const auto& e : j["data_mix"]) {
    DataMixEntry entry;
    entry.manifest = read_manifest(e.at("manifest").get<std::string>());
    entry.role = mix_role_from_name(e.value("role", "coarse_id"));
    job.train.data_mix.push_back(std::move(entry));
  }
  if (j.contains("val_manifest"))
    job.train.val_manifest = read_manifest(j["val_manifest"].get<std::string>());
  const json& m = j.value("model", json::object());
  job.decoder = decoder_kind_from_name(m.value("decoder", "pixel"));
  job.decoder_seed = m.value("decoder_seed", uint64_t(7));
  if (m.contains("encoder")) {
    const json& e = m["encoder"];
    if (e.contains("path")) {
      job.encoder_path = e["path"].get<std::string>();
    } else {
      job.encoder_cfg.patch_size = e.value("patch_size", 7);
      job.encoder_cfg.dim = e.value("dim", 32);
      job.encoder_cfg.depth = e.value("depth", 2);
      job.encoder_cfg.heads = e.value("heads", pick_head_count(job.encoder_cfg.dim));
      job.encoder_cfg.mlp_ratio = e.value("mlp_ratio", 4);
      job.encoder_cfg.pos_grid = e.value("pos_grid", 16);
      job.encoder_cfg.seed = e.value("seed", uint64_t(1));
    }
  }
  return job;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  json j;
  j["id_manifest"] = cfg.id_manifest_path;
  j["ood_manifest"] = cfg.ood_manifest_path;
  json exempt = json::array();
  for (int c : cfg.coarsify.exempt_classes)
    exempt.push_back(default_taxonomy().class_name(c));
  j["coarsify"] = {{"radius", cfg.coarsify.boundary_radius_px},
                   {"area_fraction", cfg.coarsify.polygon_area_fraction},
                   {"polygons", cfg.coarsify.polygon_count},
                   {"exempt_classes", exempt},
                   {"exempt_skip_band", cfg.coarsify.exempt_skip_band}};
  j["subset_k"] = cfg.subset_k;
  if (!cfg.encoder_path.empty()) {
    j["encoder"] = {{"path", cfg.encoder_path}};
  } else {
    const ViTConfig& e = cfg.encoder_cfg;
    j["encoder"] = {{"patch_size", e.patch_size}, {"dim", e.dim},
                    {"depth", e.depth},           {"heads", e.heads},
                    {"mlp_ratio", e.mlp_ratio},   {"pos_grid", e.pos_grid},
                    {"seed", e.seed}};
  }
  j["pairing"] = decoder_kind_name(cfg.model_a.kind) + "-" +
                 decoder_kind_name(cfg.model_b.kind);
  j["data_a"] = data_config_name(cfg.model_a.data);
  j["data_b"] = data_config_name(cfg.model_b.data);
  if (cfg.retrain_kind) j["retrain"] = decoder_kind_name(*cfg.retrain_kind);
  j["retrain_union"] = cfg.retrain_union;
  j["train"] = train_template_json(cfg.train_template);
  j["epochs_mixed"] = cfg.epochs_mixed;
  j["epochs_coarse_only"] = cfg.epochs_coarse_only;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_root;
  return j.dump(2);
}

namespace {

struct ProvenanceWriter {
  json record;
  fs::path path;

  ProvenanceWriter(const fs::path& run_dir, const PipelineConfig& cfg) {
    path = run_dir / "provenance.json";
    record["tool_version"] = kToolVersion;
    record["seed"] = cfg.seed;
    record["config"] = json::parse(pipeline_config_to_json(cfg));
    record["stages"] = json::array();
  }

  void stage_done(const std::string& name, std::vector<std::string> artifacts) {
    record["stages"].push_back({{"name", name}, {"artifacts", artifacts}});
    std::ofstream f(path, std::ios::trunc);
    f << record.dump(2) << "\n";
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "pipeline: cannot write '", path.string(), "'");
  f << text;
}

DatasetManifest subset_manifest(const DatasetManifest& base,
                                const std::vector<size_t>& train_indices,
                                const std::vector<int>& order,
                                const std::string& name) {
  DatasetManifest out;
  out.name = name;
  out.taxonomy = base.taxonomy;
  for (int pick : order) out.samples.push_back(base.samples[train_indices[size_t(pick)]]);
  return out;
}

TrainConfig assemble_train(const PipelineConfig& cfg, DataConfig data,
                           const DatasetManifest& coarse_subset,
                           const DatasetManifest& ood, uint64_t seed_salt) {
  TrainConfig t = cfg.train_template;
  t.seed = Rng::derive(cfg.seed, seed_salt);
  switch (data) {
    case DataConfig::kCoarseId:
      t.data_mix.push_back({coarse_subset, MixRole::kCoarseId});
      t.epochs = cfg.epochs_coarse_only;
      break;
    case DataConfig::kDenseOod:
      t.data_mix.push_back({ood, MixRole::kDenseOod});
      t.epochs = cfg.epochs_mixed;
      break;
    case DataConfig::kCoarseIdWithDenseOod:
      t.data_mix.push_back({coarse_subset, MixRole::kCoarseId});
      t.data_mix.push_back({ood, MixRole::kDenseOod});
      t.epochs = cfg.epochs_mixed;
      break;
  }
  return t;
}

}  // namespace

PipelineResult run_coarse_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::path run_dir(cfg.out_root);
  fs::create_directories(run_dir);
  ProvenanceWriter prov(run_dir, cfg);
  PipelineResult result;
  result.run_dir = run_dir.string();

  auto stage = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  DatasetManifest id_manifest = read_manifest(cfg.id_manifest_path);
  DatasetManifest ood_manifest;
  if (!cfg.ood_manifest_path.empty()) ood_manifest = read_manifest(cfg.ood_manifest_path);

  // 1. coarsify labeled ID train samples
  DatasetManifest coarse_manifest;
  stage("coarsify", [&] {
    fs::path dir = run_dir / "coarse";
    fs::create_directories(dir / "labels");
    coarse_manifest = id_manifest;
    coarse_manifest.name = id_manifest.name + "_coarse";
    json densities = json::array();
    double density_sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < coarse_manifest.samples.size(); ++i) {
      ImageSample& s = coarse_manifest.samples[i];
      if (s.split != Split::kTrain || !s.labeled) continue;
      LabelMask dense = load_label_png(s.label_path, coarse_manifest.taxonomy).mask;
      Rng rng(Rng::derive(Rng::derive(cfg.seed, 0xC0A25EULL), i));
      CoarsifyResult res = coarsify_mask(dense, cfg.coarsify, rng);
      std::string out_path = (dir / "labels" / strcat_msg("coarse_", i, ".png")).string();
      save_label_png(res.mask, out_path);
      densities.push_back({{"label", out_path}, {"density", res.density}});
      density_sum += res.density;
      ++count;
      s.label_path = out_path;
    }
    require(count > 0, "no labeled train samples to coarsify");
    json report{{"per_image", densities},
                {"aggregate_density", density_sum / double(count)},
                {"radius", cfg.coarsify.boundary_radius_px}};
    write_text(dir / "density.json", report.dump(2) + "\n");
    write_manifest(coarse_manifest, (dir / "manifest.json").string());
    prov.stage_done("coarsify", {(dir / "manifest.json").string(),
                                 (dir / "density.json").string()});
  });

  // shared encoder
  std::shared_ptr<ViTEncoder> encoder;
  stage("encoder", [&] {
    encoder = cfg.encoder_path.empty()
                  ? std::make_shared<ViTEncoder>(cfg.encoder_cfg)
                  : load_encoder(cfg.encoder_path);
    prov.stage_done("encoder", {});
  });

  // 2. diverse subset via FPS on CLS embeddings
  DatasetManifest coarse_subset;
  stage("select", [&] {
    fs::path dir = run_dir / "select";
    fs::create_directories(dir);
    std::vector<size_t> train_idx = coarse_manifest.indices_of(Split::kTrain);
    std::vector<size_t> labeled_idx;
    for (size_t i : train_idx)
      if (coarse_manifest.samples[i].labeled) labeled_idx.push_back(i);
    require(!labeled_idx.empty(), "no labeled train samples for selection");
    int k = std::min<int>(cfg.subset_k, int(labeled_idx.size()));
    EmbeddingMatrix emb = extract_cls_embeddings(coarse_manifest, *encoder, labeled_idx);
    std::vector<int> order = farthest_point_sample(emb, k);
    coarse_subset = subset_manifest(coarse_manifest, labeled_idx, order,
                                    coarse_manifest.name + "_subset");
    write_manifest(coarse_subset, (dir / "subset.json").string());
    json order_json{{"k", k}, {"visiting_order", order}};
    write_text(dir / "order.json", order_json.dump(2) + "\n");
    prov.stage_done("select", {(dir / "subset.json").string(),
                               (dir / "order.json").string()});
  });

  // 3. train the two models
  auto train_slot = [&](const std::string& name, const ModelSlot& slot,
                        uint64_t seed_salt) {
    auto model = std::make_shared<SegModel>(encoder, slot.kind,
                                            id_manifest.taxonomy,
                                            Rng::derive(cfg.seed, seed_salt));
    TrainConfig tc = assemble_train(cfg, slot.data, coarse_subset, ood_manifest,
                                    seed_salt + 1);
    TrainHistory history = train(*model, tc);
    fs::path dir = run_dir / name;
    fs::create_directories(dir);
    save_checkpoint(*model, (dir / "model.ckpt").string());
    write_text(dir / "history.tsv", history.to_table());
    json meta{{"decoder", decoder_kind_name(slot.kind)},
              {"data", data_config_name(slot.data)},
              {"epochs", tc.epochs}};
    write_text(dir / "stage.json", meta.dump(2) + "\n");
    prov.stage_done(name, {(dir / "model.ckpt").string(),
                           (dir / "history.tsv").string(),
                           (dir / "stage.json").string()});
    return model;
  };

  std::shared_ptr<SegModel> model_a, model_b;
  stage("train_a", [&] { model_a = train_slot("train_a", cfg.model_a, 0xA); });
  stage("train_b", [&] { model_b = train_slot("train_b", cfg.model_b, 0xB); });

  // 4. pseudo-labels over ID train images
  PseudoLabelResult pseudo;
  stage("pseudolabel", [&] {
    fs::path dir = run_dir / "pseudo";
    pseudo = generate_pseudo_labels(id_manifest, *model_a, *model_b, dir.string());
    write_text(dir / "fusion_report.json", pseudo.report.to_json() + "\n");
    write_manifest(pseudo.manifest, (dir / "manifest.json").string());
    result.pseudo_density = pseudo.report.density;
    result.pseudo_quality_miou = pseudo.report.quality_miou;
    prov.stage_done("pseudolabel", {(dir / "manifest.json").string(),
                                    (dir / "fusion_report.json").string()});
  });

  // 5. retrain on pseudo-labels (pseudo-only by default)
  std::shared_ptr<SegModel> retrained;
  stage("retrain", [&] {
    DecoderKind kind = cfg.retrain_kind.value_or(cfg.model_a.kind);
    retrained = std::make_shared<SegModel>(encoder, kind, id_manifest.taxonomy,
                                           Rng::derive(cfg.seed, 0x5E));
    TrainConfig tc = cfg.train_template;
    tc.seed = Rng::derive(cfg.seed, 0x5F);
    tc.epochs = cfg.epochs_mixed;
    tc.data_mix.push_back({pseudo.manifest, MixRole::kPseudo});
    if (cfg.retrain_union)
      tc.data_mix.push_back({coarse_subset, MixRole::kCoarseId});
    TrainHistory history = train(*retrained, tc);
    fs::path dir = run_dir / "retrain";
    fs::create_directories(dir);
    save_checkpoint(*retrained, (dir / "model.ckpt").string());
    write_text(dir / "history.tsv", history.to_table());
    json meta{{"decoder", decoder_kind_name(kind)},
              {"data", cfg.retrain_union ? "pseudo+coarse_id" : "pseudo"},
              {"epochs", tc.epochs}};
    write_text(dir / "stage.json", meta.dump(2) + "\n");
    prov.stage_done("retrain", {(dir / "model.ckpt").string(),
                                (dir / "history.tsv").string(),
                                (dir / "stage.json").string()});
  });

  // 6. evaluate on ID validation
  stage("eval", [&] {
    fs::path dir = run_dir / "eval";
    fs::create_directories(dir);
    MiouReport report = evaluate(*retrained, id_manifest, Split::kVal);
    result.final_miou = report.miou;
    write_text(dir / "report.json",
               miou_report_json(report, id_manifest.taxonomy) + "\n");
    write_text(dir / "report.txt",
               miou_report_text(report, id_manifest.taxonomy,
                                "validation mIoU (" + id_manifest.name + ")"));
    prov.stage_done("eval", {(dir / "report.json").string(),
                             (dir / "report.txt").string()});
  });

  return result;
}

std::string report_run(const std::string& run_dir, const std::string& overlay_dir) {
  fs::path root(run_dir);
  require(fs::is_directory(root), "report: '", run_dir, "' is not a directory");
  bool any_artifacts = false;
  for (const char* d : {"coarse", "select", "train_a", "train_b", "pseudo",
                        "retrain", "eval"})
    if (fs::exists(root / d)) any_artifacts = true;
  bool has_provenance = fs::exists(root / "provenance.json");
  require(any_artifacts || has_provenance, "report: run directory '", run_dir,
          "' contains no pipeline artifacts");

  std::string out;
  std::vector<std::string> gaps;
  json prov;
  if (has_provenance) {
    std::ifstream f(root / "provenance.json");
    prov = json::parse(f, nullptr, false);
    if (prov.is_discarded()) {
      has_provenance = false;
    }
  }
  if (has_provenance) {
    out += strcat_msg("run: ", run_dir, " (tool ", prov.value("tool_version", "?"),
                      ", seed ", prov.value("seed", 0), ")\n");
  } else {
    out += strcat_msg("run: ", run_dir, "\n");
    out += "WARNING: provenance record missing or unreadable; reporting raw "
           "observations only, no conclusions.\n";
  }

  auto read_json = [&](const fs::path& p) -> std::optional<json> {
    if (!fs::exists(p)) return std::nullopt;
    std::ifstream f(p);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };

  if (auto density = read_json(root / "coarse" / "density.json")) {
    out += strcat_msg("coarsify: N=", (*density).value("radius", -1),
                      ", aggregate density ",
                      (*density).value("aggregate_density", 0.0), "\n");
  } else {
    gaps.push_back("coarse/density.json");
  }
  if (auto order = read_json(root / "select" / "order.json")) {
    out += strcat_msg("select: k=", (*order).value("k", 0), "\n");
  } else {
    gaps.push_back("select/order.json");
  }

  // Table-3-style pseudo-label quality rows for the pairings present.
  std::string config_desc = "?", models_desc = "?";
  if (has_provenance && prov.contains("config")) {
    const json& c = prov["config"];
    models_desc = c.value("pairing", "?");
    config_desc = c.value("data_a", "?") + " - " + c.value("data_b", "?");
  }
  out += "\npseudo-label quality (train split):\n";
  out += "  configuration                              models        mIoU   density\n";
  if (auto fusion = read_json(root / "pseudo" / "fusion_report.json")) {
    char buf[160];
    double q = fusion->value("quality_miou", -1.0);
    std::snprintf(buf, sizeof(buf), "  %-42s %-12s %6.3f   %.3f\n",
                  config_desc.c_str(), models_desc.c_str(), q,
                  fusion->value("density", 0.0));
    out += buf;
    if (fusion->contains("strict_miou"))
      out += strcat_msg("  (strict variant counting pseudo-ignore as errors: ",
                        (*fusion)["strict_miou"].get<double>(), ")\n");
  } else {
    gaps.push_back("pseudo/fusion_report.json");
    out += "  (missing)\n";
  }

  // Table-2-style validation comparison for the retrained model.
  out += "\nvalidation mIoU:\n";
  if (auto eval = read_json(root / "eval" / "report.json")) {
    std::string retrain_data = "pseudo-labels";
    if (auto meta = read_json(root / "retrain" / "stage.json"))
      retrain_data = meta->value("data", retrain_data);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-42s %-12s %6.3f\n", retrain_data.c_str(),
                  models_desc.c_str(), eval->value("miou", -1.0));
    out += buf;
  } else {
    gaps.push_back("eval/report.json");
    out += "  (missing)\n";
  }

  // Palette-colored overlays: pseudo rasters already on disk; add retrained
  // model predictions for validation samples when a checkpoint is present.
  if (!overlay_dir.empty()) {
    fs::create_directories(overlay_dir);
    fs::path ckpt = root / "retrain" / "model.ckpt";
    fs::path manifest_path = root / "coarse" / "manifest.json";
    if (fs::exists(ckpt) && fs::exists(manifest_path)) {
      SegModel model = load_checkpoint(ckpt.string());
      DatasetManifest m = read_manifest(manifest_path.string());
      int emitted = 0;
      for (const ImageSample& s : m.samples) {
        if (s.split != Split::kVal) continue;
        LabelMask pred = model.predict(read_png(s.image_path));
        fs::path dst = fs::path(overlay_dir) / strcat_msg("pred_", emitted, ".png");
        save_label_png(pred, dst.string());
        if (++emitted >= 8) break;
      }
      out += strcat_msg("overlays: ", emitted, " prediction rasters in ",
                        overlay_dir, "\n");
    } else {
      gaps.push_back("retrain/model.ckpt (overlays skipped)");
    }
  }

  if (!gaps.empty()) {
    out += "\nmissing artifacts:\n";
    for (const std::string& g : gaps) out += "  - " + g + "\n";
  }
  return out;
}

}  // namespace coarse

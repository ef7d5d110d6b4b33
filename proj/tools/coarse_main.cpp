// Command-line front end for the coarse-label segmentation pipeline.
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coarse/coarsify.hpp"
#include "coarse/dataio.hpp"
#include "coarse/error.hpp"
#include "coarse/io/png_io.hpp"
#include "coarse/metrics.hpp"
#include "coarse/models/checkpoint.hpp"
#include "coarse/pipeline.hpp"
#include "coarse/pseudo.hpp"
#include "coarse/select.hpp"
#include "coarse/synthset.hpp"
#include "coarse/trainer.hpp"
#include "coarse/version.hpp"

namespace fs = std::filesystem;
using namespace coarse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

std::set<int> parse_exempt(const std::string& csv, const ClassTaxonomy& taxonomy) {
  std::set<int> out;
  if (csv.empty()) return out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    size_t comma = csv.find(',', pos);
    std::string name = csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                                  : comma - pos);
    if (!name.empty()) {
      int idx = taxonomy.index_of(name);
      require(idx >= 0, "unknown exempt class '", name, "'");
      out.insert(idx);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::shared_ptr<ViTEncoder> build_encoder(const std::string& path, int patch, int dim,
                                          int depth, uint64_t seed) {
  if (!path.empty()) return load_encoder(path);
  ViTConfig cfg;
  cfg.patch_size = patch;
  cfg.dim = dim;
  cfg.depth = depth;
  cfg.heads = pick_head_count(dim);
  cfg.seed = seed;
  return std::make_shared<ViTEncoder>(cfg);
}

int cmd_coarsify(const std::string& manifest_path, int radius, int polygons,
                 double area, const std::string& exempt_csv, bool exempt_skip_band,
                 uint64_t seed, const std::string& out_dir) {
  DatasetManifest manifest = read_manifest(manifest_path);
  CoarsifyConfig cfg;
  cfg.boundary_radius_px = radius;
  cfg.polygon_count = polygons;
  cfg.polygon_area_fraction = area;
  cfg.exempt_classes = exempt_csv == "default"
                           ? default_exempt_classes(manifest.taxonomy)
                           : parse_exempt(exempt_csv, manifest.taxonomy);
  cfg.exempt_skip_band = exempt_skip_band;
  cfg.validate();

  fs::create_directories(fs::path(out_dir) / "labels");
  nlohmann::json per_image = nlohmann::json::array();
  double density_sum = 0.0;
  size_t count = 0;
  DatasetManifest out_manifest = manifest;
  out_manifest.name = manifest.name + "_coarse";
  for (size_t i = 0; i < out_manifest.samples.size(); ++i) {
    ImageSample& s = out_manifest.samples[i];
    if (!s.labeled || s.split != Split::kTrain) continue;
    LabelMask dense = load_label_png(s.label_path, manifest.taxonomy).mask;
    Rng rng(Rng::derive(seed, i));
    CoarsifyResult res = coarsify_mask(dense, cfg, rng);
    std::string out_path =
        (fs::path(out_dir) / "labels" / strcat_msg("coarse_", i, ".png")).string();
    save_label_png(res.mask, out_path);
    per_image.push_back({{"label", out_path}, {"density", res.density}});
    density_sum += res.density;
    ++count;
    s.label_path = out_path;
  }
  require(count > 0, "coarsify: no labeled train samples in '", manifest_path, "'");
  nlohmann::json report{{"per_image", per_image},
                        {"aggregate_density", density_sum / double(count)},
                        {"radius", radius},
                        {"polygons", polygons},
                        {"area_fraction", area}};
  std::ofstream rf(fs::path(out_dir) / "density.json");
  rf << report.dump(2) << "\n";
  write_manifest(out_manifest, (fs::path(out_dir) / "manifest.json").string());
  std::printf("coarsified %zu masks, aggregate density %.4f -> %s\n", count,
              density_sum / double(count), out_dir.c_str());
  return kExitOk;
}

int cmd_select(const std::string& manifest_path, const std::string& encoder_path,
               int patch, int dim, int depth, uint64_t enc_seed, int k,
               const std::string& out_path) {
  DatasetManifest manifest = read_manifest(manifest_path);
  auto encoder = build_encoder(encoder_path, patch, dim, depth, enc_seed);
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < manifest.samples.size(); ++i)
    if (manifest.samples[i].split == Split::kTrain) train_idx.push_back(i);
  require(!train_idx.empty(), "select: no train samples in '", manifest_path, "'");
  EmbeddingMatrix emb = extract_cls_embeddings(manifest, *encoder, train_idx);
  require(k >= 1 && k <= emb.n, "select: k=", k, " out of range [1, ", emb.n, "]");
  std::vector<int> order = farthest_point_sample(emb, k);

  DatasetManifest subset;
  subset.name = manifest.name + "_subset";
  subset.taxonomy = manifest.taxonomy;
  for (int pick : order) subset.samples.push_back(manifest.samples[train_idx[size_t(pick)]]);
  write_manifest(subset, out_path);
  nlohmann::json order_json{{"k", k}, {"visiting_order", order}};
  std::ofstream of(out_path + ".order.json");
  of << order_json.dump(2) << "\n";
  std::printf("selected %d of %d samples -> %s\n", k, emb.n, out_path.c_str());
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_path) {
  TrainJobConfig job = train_job_from_json_file(config_path);
  require(!job.train.data_mix.empty(), "train: empty data mix");
  const ClassTaxonomy taxonomy = job.train.data_mix.front().manifest.taxonomy;
  auto encoder = build_encoder(job.encoder_path, job.encoder_cfg.patch_size,
                               job.encoder_cfg.dim, job.encoder_cfg.depth,
                               job.encoder_cfg.seed);
  SegModel model(encoder, job.decoder, taxonomy, job.decoder_seed);
  TrainHistory history = train(model, job.train);
  save_checkpoint(model, out_path);
  std::ofstream hf(out_path + ".history.tsv");
  hf << history.to_table();
  std::printf("trained %s decoder for %d epochs, final loss %.6f -> %s\n",
              decoder_kind_name(model.kind()).c_str(), job.train.epochs,
              history.epochs.back().mean_loss, out_path.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& split_str, const std::string& out_path) {
  SegModel model = load_checkpoint(model_path);
  DatasetManifest manifest = read_manifest(manifest_path);
  MiouReport report = evaluate(model, manifest, split_from_name(split_str));
  std::string text = miou_report_text(report, manifest.taxonomy,
                                      "mIoU on " + manifest.name + " [" + split_str +
                                          "]");
  std::printf("%s", text.c_str());
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << miou_report_json(report, manifest.taxonomy) << "\n";
  }
  return kExitOk;
}

int cmd_pseudolabel(const std::string& manifest_path, const std::string& model_a_path,
                    const std::string& model_b_path, const std::string& out_dir,
                    bool require_gt) {
  DatasetManifest manifest = read_manifest(manifest_path);
  SegModel model_a = load_checkpoint(model_a_path);
  SegModel model_b = load_checkpoint(model_b_path);
  PseudoLabelResult result =
      generate_pseudo_labels(manifest, model_a, model_b, out_dir);
  require(!require_gt || result.report.quality_miou.has_value(),
          "pseudolabel: --gt requested but no ground-truth labels were available");
  std::ofstream rf(fs::path(out_dir) / "fusion_report.json");
  rf << result.report.to_json() << "\n";
  write_manifest(result.manifest, (fs::path(out_dir) / "manifest.json").string());
  std::printf("pseudo-labels for %zu images, density %.4f",
              result.report.per_image_density.size(), result.report.density);
  if (result.report.quality_miou)
    std::printf(", quality mIoU %.4f", *result.report.quality_miou);
  std::printf(" -> %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              SynthConfig cfg) {
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    require(f.good(), "synth: cannot open config '", config_path, "'");
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    require(!j.is_discarded(), "synth: invalid JSON config");
    cfg.image_count = j.value("image_count", cfg.image_count);
    cfg.height = j.value("height", cfg.height);
    cfg.width = j.value("width", cfg.width);
    cfg.class_count = j.value("class_count", cfg.class_count);
    cfg.min_blobs = j.value("min_blobs", cfg.min_blobs);
    cfg.max_blobs = j.value("max_blobs", cfg.max_blobs);
    cfg.ood_hue_shift_deg = j.value("ood_hue_shift_deg", cfg.ood_hue_shift_deg);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.emit_ood = j.value("emit_ood", cfg.emit_ood);
  }
  DatasetManifest m = generate_synthset(cfg, out_dir);
  std::printf("synth dataset: %zu samples -> %s/manifest.json\n", m.samples.size(),
              out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COARSE: coarse-label semi-supervised segmentation pipeline"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // coarsify
  auto* sc_coarsify = app.add_subcommand("coarsify", "sparsify dense labels");
  std::string c_manifest, c_exempt = "default", c_out = "coarse_out";
  int c_radius = 7, c_polygons = 3;
  double c_area = 0.1;
  bool c_skip_band = false;
  uint64_t c_seed = 0;
  sc_coarsify->add_option("--manifest", c_manifest)->required();
  sc_coarsify->add_option("--radius", c_radius);
  sc_coarsify->add_option("--polygons", c_polygons);
  sc_coarsify->add_option("--area", c_area);
  sc_coarsify->add_option("--exempt", c_exempt,
                          "comma-separated class names, or 'default'");
  sc_coarsify->add_flag("--exempt-skip-band", c_skip_band);
  sc_coarsify->add_option("--seed", c_seed);
  sc_coarsify->add_option("--out", c_out);

  // select
  auto* sc_select = app.add_subcommand("select", "diverse subset via FPS");
  std::string s_manifest, s_encoder, s_out = "subset.json";
  int s_patch = 7, s_dim = 32, s_depth = 2, s_k = 300;
  uint64_t s_seed = 1;
  sc_select->add_option("--manifest", s_manifest)->required();
  sc_select->add_option("--encoder", s_encoder, "encoder container; toy when empty");
  sc_select->add_option("--patch", s_patch);
  sc_select->add_option("--dim", s_dim);
  sc_select->add_option("--depth", s_depth);
  sc_select->add_option("--encoder-seed", s_seed);
  sc_select->add_option("--k", s_k);
  sc_select->add_option("--out", s_out);

  // train
  auto* sc_train = app.add_subcommand("train", "train one decoder");
  std::string t_config, t_out = "model.ckpt";
  sc_train->add_option("--config", t_config)->required();
  sc_train->add_option("--out", t_out);

  // eval
  auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_model, e_manifest, e_split = "val", e_out;
  sc_eval->add_option("--model", e_model)->required();
  sc_eval->add_option("--manifest", e_manifest)->required();
  sc_eval->add_option("--split", e_split);
  sc_eval->add_option("--out", e_out, "also write a JSON report here");

  // pseudolabel
  auto* sc_pseudo = app.add_subcommand("pseudolabel", "fuse two models' predictions");
  std::string p_manifest, p_model_a, p_model_b, p_out = "pseudo_out";
  bool p_gt = false;
  sc_pseudo->add_option("--manifest", p_manifest)->required();
  sc_pseudo->add_option("--model-a", p_model_a)->required();
  sc_pseudo->add_option("--model-b", p_model_b)->required();
  sc_pseudo->add_option("--out", p_out);
  sc_pseudo->add_flag("--gt", p_gt, "require ground-truth quality metrics");

  // run
  auto* sc_run = app.add_subcommand("run", "full pipeline");
  std::string r_config, r_out;
  int64_t r_seed = -1;
  sc_run->add_option("--config", r_config)->required();
  sc_run->add_option("--out", r_out, "override the configured output root");
  sc_run->add_option("--seed", r_seed, "override the configured seed");

  // report
  auto* sc_report = app.add_subcommand("report", "summarize a run directory");
  std::string rp_dir, rp_overlays;
  sc_report->add_option("rundir", rp_dir)->required();
  sc_report->add_option("--overlays", rp_overlays, "emit prediction rasters here");

  // synth
  auto* sc_synth = app.add_subcommand("synth", "generate the synthetic dataset");
  std::string sy_config, sy_out = "synth_out";
  SynthConfig sy_cfg;
  sc_synth->add_option("--config", sy_config);
  sc_synth->add_option("--out", sy_out);
  sc_synth->add_option("--count", sy_cfg.image_count);
  sc_synth->add_option("--height", sy_cfg.height);
  sc_synth->add_option("--width", sy_cfg.width);
  sc_synth->add_option("--classes", sy_cfg.class_count);
  sc_synth->add_option("--hue-shift", sy_cfg.ood_hue_shift_deg);
  sc_synth->add_option("--seed", sy_cfg.seed);

  // manifest adapters
  auto* sc_manifest = app.add_subcommand("manifest", "emit a manifest from a dataset tree");
  std::string m_style, m_frames, m_annotations, m_root, m_out = "manifest.json";
  sc_manifest->add_option("--style", m_style, "rugd or rellis")->required();
  sc_manifest->add_option("--frames", m_frames, "RUGD frames root");
  sc_manifest->add_option("--annotations", m_annotations, "RUGD annotations root");
  sc_manifest->add_option("--root", m_root, "Rellis-3D root");
  sc_manifest->add_option("--out", m_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sc_coarsify->parsed())
      return cmd_coarsify(c_manifest, c_radius, c_polygons, c_area, c_exempt,
                          c_skip_band, c_seed, c_out);
    if (sc_select->parsed())
      return cmd_select(s_manifest, s_encoder, s_patch, s_dim, s_depth, s_seed, s_k,
                        s_out);
    if (sc_train->parsed()) return cmd_train(t_config, t_out);
    if (sc_eval->parsed()) return cmd_eval(e_model, e_manifest, e_split, e_out);
    if (sc_pseudo->parsed())
      return cmd_pseudolabel(p_manifest, p_model_a, p_model_b, p_out, p_gt);
    if (sc_run->parsed()) {
      PipelineConfig cfg = pipeline_config_from_json_file(r_config);
      if (!r_out.empty()) cfg.out_root = r_out;
      if (r_seed >= 0) cfg.seed = uint64_t(r_seed);
      try {
        PipelineResult result = run_coarse_pipeline(cfg);
        std::printf("pipeline complete: pseudo density %.4f", result.pseudo_density);
        if (result.pseudo_quality_miou)
          std::printf(", pseudo quality mIoU %.4f", *result.pseudo_quality_miou);
        std::printf(", final val mIoU %.4f\nrun dir: %s\n", result.final_miou,
                    result.run_dir.c_str());
        return kExitOk;
      } catch (const StageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStage;
      }
    }
    if (sc_report->parsed()) {
      std::string text = report_run(rp_dir, rp_overlays);
      std::printf("%s", text.c_str());
      return kExitOk;
    }
    if (sc_synth->parsed()) return cmd_synth(sy_config, sy_out, sy_cfg);
    if (sc_manifest->parsed()) {
      DatasetManifest m;
      if (m_style == "rugd") {
        m = rugd_style_manifest(m_frames, m_annotations, default_taxonomy());
      } else if (m_style == "rellis") {
        m = rellis_style_manifest(m_root, default_taxonomy());
      } else {
        fail("manifest: unknown style '", m_style, "' (expected rugd or rellis)");
      }
      write_manifest(m, m_out);
      std::printf("manifest with %zu samples -> %s\n", m.samples.size(), m_out.c_str());
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    // Configuration problems (bad files, bad names) exit 2; anything that
    // happens mid-stage exits 3. Errors thrown before any computation are
    // treated as configuration errors.
    std::string msg = e.what();
    bool config_like = msg.find("cannot open") != std::string::npos ||
                       msg.find("invalid JSON") != std::string::npos ||
                       msg.find("unknown") != std::string::npos ||
                       msg.find("missing") != std::string::npos ||
                       msg.find("out of range") != std::string::npos;
    return config_like ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return kExitConfig;
}

#pragma once

#include <optional>
#include <string>

#include "coarse/coarsify.hpp"
#include "coarse/error.hpp"
#include "coarse/models/model.hpp"
#include "coarse/trainer.hpp"

namespace coarse {

enum class DataConfig { kCoarseId, kDenseOod, kCoarseIdWithDenseOod };
std::string data_config_name(DataConfig d);
DataConfig data_config_from_name(const std::string& name);

struct ModelSlot {
  DecoderKind kind = DecoderKind::kPixel;
  DataConfig data = DataConfig::kCoarseIdWithDenseOod;
};

struct PipelineConfig {
  std::string id_manifest_path;   // target domain, dense train labels + val
  std::string ood_manifest_path;  // auxiliary dense out-of-distribution data
  CoarsifyConfig coarsify;
  int subset_k = 300;
  ViTConfig encoder_cfg;          // seeded toy encoder when encoder_path empty
  std::string encoder_path;       // optional pretrained encoder container
  ModelSlot model_a;              // default pairing: pixel on coarse+dense OOD
  ModelSlot model_b;              // patch on coarse ID
  std::optional<DecoderKind> retrain_kind;  // defaults to model_a.kind
  bool retrain_union = false;     // add the coarse subset to pseudo retraining
  TrainConfig train_template;     // lr, crops, batch...; data_mix filled per stage
  int epochs_mixed = 200;
  int epochs_coarse_only = 500;
  uint64_t seed = 0;
  std::string out_root;

  void validate() const;
};

PipelineConfig pipeline_config_from_json_file(const std::string& path);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

// Standalone training job: TrainConfig (manifests resolved from paths) plus
// the model to build. Mirrors the train subcommand's JSON config.
struct TrainJobConfig {
  TrainConfig train;
  DecoderKind decoder = DecoderKind::kPixel;
  ViTConfig encoder_cfg;
  std::string encoder_path;  // pretrained container; empty = seeded toy
  uint64_t decoder_seed = 7;
};
TrainJobConfig train_job_from_json_file(const std::string& path);

// Runs coarsify -> subset selection -> train A/B -> pseudo-label -> retrain ->
// eval, writing every stage artifact plus a provenance record under
// cfg.out_root. Throws StageError (with the stage name) on failure; partial
// artifacts are left in place.
struct StageError : Error {
  std::string stage;
  StageError(std::string stage_name, const std::string& msg)
      : Error("stage '" + stage_name + "': " + msg), stage(std::move(stage_name)) {}
};

struct PipelineResult {
  std::string run_dir;
  double pseudo_density = 0.0;
  std::optional<double> pseudo_quality_miou;
  double final_miou = 0.0;
};

PipelineResult run_coarse_pipeline(const PipelineConfig& cfg);

// Summary tables plus palette-colored prediction/pseudo-label overlays from
// the artifacts present in a run directory. Missing pieces are flagged, a
// missing provenance record downgrades the report to observations only.
std::string report_run(const std::string& run_dir, const std::string& overlay_dir);

}  // namespace coarse

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coarse/dataio.hpp"
#include "coarse/metrics.hpp"
#include "coarse/models/model.hpp"
#include "coarse/rng.hpp"

namespace coarse {

enum class MixRole { kCoarseId, kDenseOod, kPseudo };
std::string mix_role_name(MixRole r);
MixRole mix_role_from_name(const std::string& name);

enum class WeightMode { kUniform, kInverseFrequency };
std::string weight_mode_name(WeightMode m);
WeightMode weight_mode_from_name(const std::string& name);

struct DataMixEntry {
  DatasetManifest manifest;
  MixRole role = MixRole::kCoarseId;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;                 // 500 for coarse-only runs
  int crop_h = 512, crop_w = 512;
  int full_h = 512, full_w = 1024;  // full-resolution finetune phase
  double crop_phase_fraction = 0.9;
  WeightMode weight_mode = WeightMode::kUniform;
  uint64_t seed = 0;
  int batch_size = 8;
  double scale_min = 0.5, scale_max = 2.0;
  std::vector<DataMixEntry> data_mix;
  std::optional<DatasetManifest> val_manifest;
  int eval_interval = 0;  // epochs between validation passes; 0 disables

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "crop" or "full"
  double mean_loss = 0.0;
  bool has_val = false;
  double val_miou = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_table() const;  // tab-delimited, one row per epoch
};

// Per-class loss weights. Uniform: all ones. Inverse frequency:
// w_c ∝ 1 / max(freq_c, 1e-3), normalized to mean 1.
std::vector<double> class_weights(const ClassFrequencyTable& freq, WeightMode mode);

// Scalar weighted cross entropy on plain tensors (the differentiable version
// lives on the tape; this wrapper serves tests and bindings).
double weighted_ce_loss_value(const nn::Tensor& logits, const LabelMask& target,
                              const std::vector<double>& weights);

// Random scale in [scale_min, scale_max], bilinear/nearest resize, uniform
// crop. Draws that leave the image smaller than the crop are redrawn a
// bounded number of times, then reflect-padding makes up the difference.
struct CropResult {
  ImageU8 image;
  LabelMask mask;
};
CropResult random_resize_crop(const ImageU8& image, const LabelMask& mask, int out_h,
                              int out_w, Rng& rng, double scale_min = 0.5,
                              double scale_max = 2.0);

// Adam on decoder parameters only; the encoder stays frozen. Two phases:
// crop_phase_fraction of the epochs on random resize crops, the remainder at
// the configured full resolution. The mix is concatenated and reshuffled
// every epoch with per-epoch derived seeds.
TrainHistory train(SegModel& model, const TrainConfig& cfg);

// Full-resolution evaluation over labeled samples of the given split.
MiouReport evaluate(const SegModel& model, const DatasetManifest& manifest,
                    Split split = Split::kVal);

}  // namespace coarse

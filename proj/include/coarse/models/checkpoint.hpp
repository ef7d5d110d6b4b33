#pragma once

#include <memory>
#include <string>

#include "coarse/models/model.hpp"

namespace coarse {

// Versioned checkpoint container: magic + JSON header (arch hash, taxonomy,
// decoder kind, configs, tensor directory) + raw little-endian doubles.
// Loading refuses files whose stored arch hash does not match the hash
// recomputed from their own configs, and files whose tensor directory does
// not match the rebuilt model.
void save_checkpoint(const SegModel& model, const std::string& path);
SegModel load_checkpoint(const std::string& path);

// Encoder-only container for pluggable pretrained backbones.
void save_encoder(const ViTEncoder& encoder, const std::string& path);
std::shared_ptr<ViTEncoder> load_encoder(const std::string& path);

uint64_t fnv1a_hash(const std::string& text);

}  // namespace coarse

#pragma once

#include <string>

#include "coarse/io/image.hpp"

namespace coarse {

// Minimal PNG codec backed by zlib. Supports what the pipeline needs:
// reading 8-bit grayscale / RGB / RGBA / palette images (no interlacing),
// writing 8-bit RGB. Output bytes are deterministic for identical input.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

}  // namespace coarse

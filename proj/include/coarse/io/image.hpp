#pragma once

#include <cstdint>
#include <vector>

namespace coarse {

// Interleaved 8-bit image, row-major, RGB(A) or grayscale.
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> data;  // height * width * channels

  ImageU8() = default;
  ImageU8(int h, int w, int c, uint8_t fill = 0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  uint8_t& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }

  bool operator==(const ImageU8&) const = default;
};

// Rotate hue of an RGB image by `degrees` (HSV hue channel), used for the
// synthetic OOD domain shift. Zero degrees is the identity.
ImageU8 rotate_hue(const ImageU8& img, double degrees);

}  // namespace coarse

#include "coarse/io/image.hpp"

#include <algorithm>
#include <cmath>

#include "coarse/error.hpp"

namespace coarse {
namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  double c = v * s;
  double hp = h / 60.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1)      { r1 = c; g1 = x; }
  else if (hp < 2) { r1 = x; g1 = c; }
  else if (hp < 3) { g1 = c; b1 = x; }
  else if (hp < 4) { g1 = x; b1 = c; }
  else if (hp < 5) { r1 = x; b1 = c; }
  else             { r1 = c; b1 = x; }
  double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

ImageU8 rotate_hue(const ImageU8& img, double degrees) {
  require(img.channels == 3, "rotate_hue expects an RGB image");
  if (degrees == 0.0) return img;
  ImageU8 out(img.height, img.width, 3);
  for (size_t i = 0; i < img.pixel_count(); ++i) {
    double r = img.data[i * 3 + 0] / 255.0;
    double g = img.data[i * 3 + 1] / 255.0;
    double b = img.data[i * 3 + 2] / 255.0;
    double h, s, v;
    rgb_to_hsv(r, g, b, h, s, v);
    h = std::fmod(h + degrees, 360.0);
    if (h < 0.0) h += 360.0;
    hsv_to_rgb(h, s, v, r, g, b);
    out.data[i * 3 + 0] = uint8_t(std::lround(std::clamp(r, 0.0, 1.0) * 255.0));
    out.data[i * 3 + 1] = uint8_t(std::lround(std::clamp(g, 0.0, 1.0) * 255.0));
    out.data[i * 3 + 2] = uint8_t(std::lround(std::clamp(b, 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace coarse

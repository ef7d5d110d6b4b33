#include "coarse/io/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "coarse/error.hpp"

namespace coarse {
namespace {

constexpr uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
         uint32_t(p[3]);
}

void write_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf len = expected;
  int rc = uncompress(out.data(), &len, in.data(), in.size());
  require(rc == Z_OK && len == expected, "png: corrupt compressed data (zlib rc=", rc, ")");
  return out;
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& in) {
  uLongf bound = compressBound(in.size());
  std::vector<uint8_t> out(bound);
  int rc = compress2(out.data(), &bound, in.data(), in.size(), 6);
  require(rc == Z_OK, "png: zlib compression failed (rc=", rc, ")");
  out.resize(bound);
  return out;
}

}  // namespace

ImageU8 read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "png: cannot open '", path, "' for reading");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  require(bytes.size() > 8 && std::memcmp(bytes.data(), kSignature, 8) == 0,
          "png: '", path, "' is not a PNG file");

  uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  std::vector<uint8_t> palette;  // rgb triples

  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= bytes.size() && !saw_iend) {
    uint32_t len = read_be32(&bytes[pos]);
    require(pos + 12 + len <= bytes.size(), "png: truncated chunk in '", path, "'");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, "png: bad IHDR in '", path, "'");
      width = read_be32(data);
      height = read_be32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      palette.assign(data, data + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && width > 0 && height > 0, "png: missing IHDR in '", path, "'");
  require(bit_depth == 8, "png: unsupported bit depth ", bit_depth, " in '", path, "'");
  require(interlace == 0, "png: interlaced files unsupported ('", path, "')");

  int src_channels = 0;
  switch (color_type) {
    case 0: src_channels = 1; break;  // gray
    case 2: src_channels = 3; break;  // rgb
    case 3: src_channels = 1; break;  // palette
    case 4: src_channels = 2; break;  // gray+alpha
    case 6: src_channels = 4; break;  // rgba
    default: fail("png: unsupported color type ", color_type, " in '", path, "'");
  }

  size_t stride = static_cast<size_t>(width) * src_channels;
  std::vector<uint8_t> raw = zlib_inflate(idat, (stride + 1) * height);

  // Undo per-row filters in place.
  std::vector<uint8_t> scan(stride * height);
  int bpp = src_channels;
  for (uint32_t y = 0; y < height; ++y) {
    uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = &raw[y * (stride + 1) + 1];
    uint8_t* dst = &scan[y * stride];
    const uint8_t* up = y > 0 ? &scan[(y - 1) * stride] : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      int a = x >= size_t(bpp) ? dst[x - bpp] : 0;
      int b = up ? up[x] : 0;
      int c = (up && x >= size_t(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail("png: bad filter byte ", int(filter), " in '", path, "'");
      }
      dst[x] = uint8_t(v);
    }
  }

  // Normalize to RGB (or keep single gray channel).
  ImageU8 img(int(height), int(width), color_type == 0 ? 1 : 3);
  for (uint32_t y = 0; y < height; ++y) {
    for (uint32_t x = 0; x < width; ++x) {
      const uint8_t* s = &scan[y * stride + x * src_channels];
      uint8_t* d = &img.data[(static_cast<size_t>(y) * width + x) * img.channels];
      switch (color_type) {
        case 0: d[0] = s[0]; break;
        case 2: d[0] = s[0]; d[1] = s[1]; d[2] = s[2]; break;
        case 3: {
          size_t idx = size_t(s[0]) * 3;
          require(idx + 2 < palette.size(), "png: palette index out of range in '", path, "'");
          d[0] = palette[idx]; d[1] = palette[idx + 1]; d[2] = palette[idx + 2];
          break;
        }
        case 4: d[0] = d[1] = d[2] = s[0]; break;
        case 6: d[0] = s[0]; d[1] = s[1]; d[2] = s[2]; break;
      }
    }
  }
  return img;
}

void write_png(const std::string& path, const ImageU8& img) {
  require(img.channels == 3, "png: writer expects 3-channel RGB images");
  require(img.height > 0 && img.width > 0, "png: refusing to write empty image");

  size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[y * (stride + 1) + 1], &img.data[y * stride], stride);
  }
  std::vector<uint8_t> compressed = zlib_deflate(raw);

  std::vector<uint8_t> out(kSignature, kSignature + 8);
  auto chunk = [&out](const char* type, const std::vector<uint8_t>& payload) {
    write_be32(out, uint32_t(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(0, &out[start], uint32_t(out.size() - start));
    write_be32(out, crc);
  };

  std::vector<uint8_t> ihdr;
  write_be32(ihdr, uint32_t(img.width));
  write_be32(ihdr, uint32_t(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: rgb
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "png: cannot open '", path, "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  require(f.good(), "png: write failed for '", path, "'");
}

}  // namespace coarse

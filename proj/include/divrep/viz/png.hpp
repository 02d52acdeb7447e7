#pragma once

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "divrep/tensor.hpp"

namespace divrep::viz {

struct Canvas {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

  Canvas(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255)
      : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3) {
    for (size_t i = 0; i < rgb.size(); i += 3) {
      rgb[i] = r;
      rgb[i + 1] = g;
      rgb[i + 2] = b;
    }
  }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    size_t at = (static_cast<size_t>(y) * width + x) * 3;
    rgb[at] = r;
    rgb[at + 1] = g;
    rgb[at + 2] = b;
  }

  void disc(int cx, int cy, int radius, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = cy - radius; y <= cy + radius; ++y)
      for (int x = cx - radius; x <= cx + radius; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) set(x, y, r, g, b);
  }

  void fill_rect(int x0, int y0, int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, r, g, b);
  }
};

namespace detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
  put_u32_be(out, static_cast<uint32_t>(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32_be(out, crc);
}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Canvas& canvas) {
  // filter byte 0 per scanline, zlib-compressed
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(canvas.height) * (canvas.width * 3 + 1));
  for (int y = 0; y < canvas.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = canvas.rgb.data() + static_cast<size_t>(y) * canvas.width * 3;
    raw.insert(raw.end(), row, row + canvas.width * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  DIVREP_CHECK(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                         6) == Z_OK,
               "png deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.width));
  detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // adaptive filters
  ihdr.push_back(0);   // no interlace
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", compressed);
  detail::put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  DIVREP_CHECK(f.good(), "cannot write png: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

// [3, H, W] float image in [0,1] -> canvas pixels at integer scale
inline void blit_image(Canvas& canvas, const Tensorf& img, int x0, int y0, int scale = 1) {
  DIVREP_CHECK(img.rank() == 3 && img.dim(0) == 3, "blit expects [3, H, W]");
  const int64_t H = img.dim(1), W = img.dim(2);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      auto q = [&](int c) {
        float v = img[(c * H + y) * W + x];
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
      };
      uint8_t r = q(0), g = q(1), b = q(2);
      for (int sy = 0; sy < scale; ++sy)
        for (int sx = 0; sx < scale; ++sx)
          canvas.set(x0 + static_cast<int>(x) * scale + sx, y0 + static_cast<int>(y) * scale + sy,
                     r, g, b);
    }
}

}  // namespace divrep::viz

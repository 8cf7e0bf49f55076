#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctxshap {

// An 8-bit RGB pixel buffer.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // 3 bytes per pixel, row-major

  void fill(uint8_t r, uint8_t g, uint8_t b);
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
};

// Rasterizes the axis-aligned SVG subset produced by render_svg (rect,
// line, text with a built-in 5x7 bitmap font) at an integer scale.
// Deterministic: identical input gives identical pixels.
RgbImage rasterize_svg(const std::string& svg, int scale = 2);

// Minimal RGB8 PNG encoder (zlib-backed, fixed settings).
std::vector<uint8_t> encode_png(const RgbImage& image);

// rasterize_svg followed by encode_png.
std::vector<uint8_t> svg_to_png(const std::string& svg, int scale = 2);

}  // namespace ctxshap

#include "ctxshap/raster.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

namespace ctxshap {

namespace {

// Classic 5x7 LCD font, column-major, bit 0 = top row; ASCII 0x20..0x7E.
const uint8_t kFont5x7[95][5] = {
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00},
    {0x00, 0x07, 0x00, 0x07, 0x00}, {0x14, 0x7F, 0x14, 0x7F, 0x14},
    {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00},
    {0x00, 0x1C, 0x22, 0x41, 0x00}, {0x00, 0x41, 0x22, 0x1C, 0x00},
    {0x14, 0x08, 0x3E, 0x08, 0x14}, {0x08, 0x08, 0x3E, 0x08, 0x08},
    {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08},
    {0x00, 0x60, 0x60, 0x00, 0x00}, {0x20, 0x10, 0x08, 0x04, 0x02},
    {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
    {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
    {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
    {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E},
    {0x00, 0x36, 0x36, 0x00, 0x00}, {0x00, 0x56, 0x36, 0x00, 0x00},
    {0x08, 0x14, 0x22, 0x41, 0x00}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x00, 0x41, 0x22, 0x14, 0x08}, {0x02, 0x01, 0x51, 0x09, 0x06},
    {0x32, 0x49, 0x79, 0x41, 0x3E}, {0x7E, 0x11, 0x11, 0x11, 0x7E},
    {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
    {0x7F, 0x41, 0x41, 0x22, 0x1C}, {0x7F, 0x49, 0x49, 0x49, 0x41},
    {0x7F, 0x09, 0x09, 0x09, 0x01}, {0x3E, 0x41, 0x49, 0x49, 0x7A},
    {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41},
    {0x7F, 0x40, 0x40, 0x40, 0x40}, {0x7F, 0x02, 0x0C, 0x02, 0x7F},
    {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
    {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E},
    {0x7F, 0x09, 0x19, 0x29, 0x46}, {0x46, 0x49, 0x49, 0x49, 0x31},
    {0x01, 0x01, 0x7F, 0x01, 0x01}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x3F, 0x40, 0x38, 0x40, 0x3F},
    {0x63, 0x14, 0x08, 0x14, 0x63}, {0x07, 0x08, 0x70, 0x08, 0x07},
    {0x61, 0x51, 0x49, 0x45, 0x43}, {0x00, 0x7F, 0x41, 0x41, 0x00},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x00, 0x41, 0x41, 0x7F, 0x00},
    {0x04, 0x02, 0x01, 0x02, 0x04}, {0x40, 0x40, 0x40, 0x40, 0x40},
    {0x00, 0x01, 0x02, 0x04, 0x00}, {0x20, 0x54, 0x54, 0x54, 0x78},
    {0x7F, 0x48, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x20},
    {0x38, 0x44, 0x44, 0x48, 0x7F}, {0x38, 0x54, 0x54, 0x54, 0x18},
    {0x08, 0x7E, 0x09, 0x01, 0x02}, {0x0C, 0x52, 0x52, 0x52, 0x3E},
    {0x7F, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7D, 0x40, 0x00},
    {0x20, 0x40, 0x44, 0x3D, 0x00}, {0x7F, 0x10, 0x28, 0x44, 0x00},
    {0x00, 0x41, 0x7F, 0x40, 0x00}, {0x7C, 0x04, 0x18, 0x04, 0x78},
    {0x7C, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38},
    {0x7C, 0x14, 0x14, 0x14, 0x08}, {0x08, 0x14, 0x14, 0x18, 0x7C},
    {0x7C, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x20},
    {0x04, 0x3F, 0x44, 0x40, 0x20}, {0x3C, 0x40, 0x40, 0x20, 0x7C},
    {0x1C, 0x20, 0x40, 0x20, 0x1C}, {0x3C, 0x40, 0x30, 0x40, 0x3C},
    {0x44, 0x28, 0x10, 0x28, 0x44}, {0x0C, 0x50, 0x50, 0x50, 0x3C},
    {0x44, 0x64, 0x54, 0x4C, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00},
    {0x00, 0x00, 0x7F, 0x00, 0x00}, {0x00, 0x41, 0x36, 0x08, 0x00},
    {0x08, 0x04, 0x08, 0x10, 0x08},
};

struct Color {
  uint8_t r = 0, g = 0, b = 0;
  bool none = false;
};

Color parse_color(const std::string& value) {
  if (value.empty() || value == "none") return {0, 0, 0, true};
  if (value.size() == 7 && value[0] == '#') {
    auto hex = [&](size_t i) {
      return uint8_t(std::stoi(value.substr(i, 2), nullptr, 16));
    };
    return {hex(1), hex(3), hex(5), false};
  }
  return {51, 51, 51, false};  // unknown names render as the text gray
}

// Attribute map of a single tag plus any inner text.
struct Element {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::string content;
};

double attr_number(const Element& el, const std::string& name, double fallback = 0.0) {
  auto it = el.attrs.find(name);
  return it == el.attrs.end() ? fallback : std::stod(it->second);
}

std::string attr_text(const Element& el, const std::string& name,
                      const std::string& fallback = "") {
  auto it = el.attrs.find(name);
  return it == el.attrs.end() ? fallback : it->second;
}

std::string xml_unescape(const std::string& text) {
  std::string out;
  for (size_t i = 0; i < text.size();) {
    if (text[i] == '&') {
      if (text.compare(i, 5, "&amp;") == 0) { out += '&'; i += 5; continue; }
      if (text.compare(i, 4, "&lt;") == 0) { out += '<'; i += 4; continue; }
      if (text.compare(i, 4, "&gt;") == 0) { out += '>'; i += 4; continue; }
      if (text.compare(i, 6, "&quot;") == 0) { out += '"'; i += 6; continue; }
    }
    out += text[i++];
  }
  return out;
}

// Pulls the next element starting at `pos`; understands the self-closing
// and <text>...</text> forms render_svg emits.
bool next_element(const std::string& svg, size_t& pos, Element& out) {
  size_t open = svg.find('<', pos);
  while (open != std::string::npos && open + 1 < svg.size() &&
         (svg[open + 1] == '/' || svg[open + 1] == '!' || svg[open + 1] == '?'))
    open = svg.find('<', open + 1);
  if (open == std::string::npos) return false;
  size_t close = svg.find('>', open);
  if (close == std::string::npos) return false;

  std::string head = svg.substr(open + 1, close - open - 1);
  bool self_closing = !head.empty() && head.back() == '/';
  if (self_closing) head.pop_back();

  out = Element{};
  size_t i = 0;
  while (i < head.size() && !isspace(uint8_t(head[i]))) out.tag += head[i++];
  while (i < head.size()) {
    while (i < head.size() && isspace(uint8_t(head[i]))) ++i;
    std::string name;
    while (i < head.size() && head[i] != '=' && !isspace(uint8_t(head[i]))) name += head[i++];
    if (name.empty()) break;
    if (i < head.size() && head[i] == '=') {
      ++i;
      if (i < head.size() && head[i] == '"') {
        size_t end = head.find('"', i + 1);
        if (end == std::string::npos) break;
        out.attrs[name] = xml_unescape(head.substr(i + 1, end - i - 1));
        i = end + 1;
      }
    }
  }

  pos = close + 1;
  if (!self_closing && out.tag == "text") {
    size_t end_tag = svg.find("</text>", pos);
    if (end_tag != std::string::npos) {
      out.content = xml_unescape(svg.substr(pos, end_tag - pos));
      pos = end_tag + 7;
    }
  }
  return true;
}

int round_px(double v) { return int(std::lround(v)); }

void draw_glyph(RgbImage& img, int x, int y, char c, int px, const Color& color) {
  if (c < 0x20 || c > 0x7E) c = '?';
  const uint8_t* columns = kFont5x7[c - 0x20];
  for (int col = 0; col < 5; ++col)
    for (int row = 0; row < 7; ++row)
      if ((columns[col] >> row) & 1)
        for (int dy = 0; dy < px; ++dy)
          for (int dx = 0; dx < px; ++dx)
            img.set(x + col * px + dx, y + row * px + dy, color.r, color.g, color.b);
}

// Replaces multi-byte UTF-8 sequences with '?' so layout stays stable.
std::string to_ascii(const std::string& text) {
  std::string out;
  for (size_t i = 0; i < text.size();) {
    uint8_t c = uint8_t(text[i]);
    if (c < 0x80) {
      out += char(c);
      ++i;
    } else {
      out += '?';
      ++i;
      while (i < text.size() && (uint8_t(text[i]) & 0xC0) == 0x80) ++i;
    }
  }
  return out;
}

}  // namespace

void RgbImage::fill(uint8_t r, uint8_t g, uint8_t b) {
  for (size_t i = 0; i + 2 < pixels.size(); i += 3) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
}

void RgbImage::set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  size_t i = (size_t(y) * size_t(width) + size_t(x)) * 3;
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

RgbImage rasterize_svg(const std::string& svg, int scale) {
  if (scale < 1) throw std::invalid_argument("scale must be >= 1");

  Element el;
  size_t pos = 0;
  if (!next_element(svg, pos, el) || el.tag != "svg")
    throw std::invalid_argument("not an SVG document");

  RgbImage img;
  img.width = round_px(attr_number(el, "width", 1) * scale);
  img.height = round_px(attr_number(el, "height", 1) * scale);
  if (img.width <= 0 || img.height <= 0 || int64_t(img.width) * img.height > 64 * 1024 * 1024)
    throw std::invalid_argument("unreasonable SVG canvas size");
  img.pixels.assign(size_t(img.width) * size_t(img.height) * 3, 255);

  while (next_element(svg, pos, el)) {
    if (el.tag == "rect") {
      Color fill = parse_color(attr_text(el, "fill"));
      if (fill.none) continue;
      int x0 = round_px(attr_number(el, "x") * scale);
      int y0 = round_px(attr_number(el, "y") * scale);
      int x1 = round_px((attr_number(el, "x") + attr_number(el, "width")) * scale);
      int y1 = round_px((attr_number(el, "y") + attr_number(el, "height")) * scale);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.set(x, y, fill.r, fill.g, fill.b);
    } else if (el.tag == "line") {
      Color stroke = parse_color(attr_text(el, "stroke", "#000000"));
      if (stroke.none) continue;
      const bool dashed = el.attrs.count("stroke-dasharray") > 0;
      int x0 = round_px(attr_number(el, "x1") * scale);
      int y0 = round_px(attr_number(el, "y1") * scale);
      int x1 = round_px(attr_number(el, "x2") * scale);
      int y1 = round_px(attr_number(el, "y2") * scale);
      // Only the axis-aligned lines the plot emitter produces.
      const int thick = scale;
      if (y0 == y1) {
        if (x0 > x1) std::swap(x0, x1);
        for (int x = x0; x <= x1; ++x) {
          if (dashed && (x - x0) / (4 * scale) % 2 == 1) continue;
          for (int t = 0; t < thick; ++t) img.set(x, y0 + t, stroke.r, stroke.g, stroke.b);
        }
      } else if (x0 == x1) {
        if (y0 > y1) std::swap(y0, y1);
        for (int y = y0; y <= y1; ++y) {
          if (dashed && (y - y0) / (4 * scale) % 2 == 1) continue;
          for (int t = 0; t < thick; ++t) img.set(x0 + t, y, stroke.r, stroke.g, stroke.b);
        }
      }
    } else if (el.tag == "text") {
      Color fill = parse_color(attr_text(el, "fill", "#333333"));
      const std::string content = to_ascii(el.content);
      const double font_size = attr_number(el, "font-size", 12);
      const int px = std::max(1, round_px(font_size * scale / 9.0));
      const int advance = 6 * px;
      int width = int(content.size()) * advance - (content.empty() ? 0 : px);
      int x = round_px(attr_number(el, "x") * scale);
      int y = round_px(attr_number(el, "y") * scale) - 7 * px;  // y is the baseline
      const std::string anchor = attr_text(el, "text-anchor", "start");
      if (anchor == "middle") x -= width / 2;
      else if (anchor == "end") x -= width;
      for (size_t i = 0; i < content.size(); ++i)
        draw_glyph(img, x + int(i) * advance, y, content[i], px, fill);
    }
  }
  return img;
}

std::vector<uint8_t> encode_png(const RgbImage& image) {
  auto push_u32 = [](std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
  };
  auto push_chunk = [&](std::vector<uint8_t>& out, const char type[4],
                        const std::vector<uint8_t>& data) {
    push_u32(out, uint32_t(data.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = uint32_t(
        crc32(0L, out.data() + crc_start, uInt(out.size() - crc_start)));
    push_u32(out, crc);
  };

  // Filter byte 0 before every scanline.
  std::vector<uint8_t> raw;
  raw.reserve(size_t(image.height) * (size_t(image.width) * 3 + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = image.pixels.data() + size_t(y) * size_t(image.width) * 3;
    raw.insert(raw.end(), row, row + size_t(image.width) * 3);
  }
  uLongf compressed_size = compressBound(uLong(raw.size()));
  std::vector<uint8_t> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw std::runtime_error("PNG deflate failed");
  compressed.resize(compressed_size);

  std::vector<uint8_t> ihdr;
  push_u32(ihdr, uint32_t(image.width));
  push_u32(ihdr, uint32_t(image.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);

  std::vector<uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  push_chunk(png, "IHDR", ihdr);
  push_chunk(png, "IDAT", compressed);
  push_chunk(png, "IEND", {});
  return png;
}

std::vector<uint8_t> svg_to_png(const std::string& svg, int scale) {
  return encode_png(rasterize_svg(svg, scale));
}

}  // namespace ctxshap

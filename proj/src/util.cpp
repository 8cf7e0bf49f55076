#include "ctxshap/util.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace ctxshap {

namespace {

std::string to_chars_or_throw(double value, std::chars_format fmt, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value, fmt, precision);
  if (res.ec != std::errc{}) throw std::runtime_error("float formatting failed");
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  return to_chars_or_throw(value, std::chars_format::fixed, decimals);
}

std::string format_trimmed(double value, int decimals) {
  std::string s = format_fixed(value, decimals);
  if (s.find('.') == std::string::npos) return s;
  size_t last = s.find_last_not_of('0');
  if (s[last] == '.') --last;
  s.erase(last + 1);
  return s;
}

std::string format_general(double value, int significant) {
  return to_chars_or_throw(value, std::chars_format::general, significant);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string base64_encode(const uint8_t* data, size_t len) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    uint32_t n = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) | data[i + 2];
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += alphabet[(n >> 6) & 63];
    out += alphabet[n & 63];
  }
  if (i + 1 == len) {
    uint32_t n = uint32_t(data[i]) << 16;
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == len) {
    uint32_t n = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += alphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &md_len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace ctxshap

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxshap {

// Locale-independent float formatting (std::to_chars under the hood).
std::string format_fixed(double value, int decimals);
// Fixed-precision, then trailing zeros (and a bare decimal point) stripped.
std::string format_trimmed(double value, int decimals);
// Shortest-significant formatting, e.g. 4 significant digits for tables.
std::string format_general(double value, int significant);

// Escapes &, <, >, " for use in XML/SVG text and attributes.
std::string xml_escape(std::string_view text);

std::string base64_encode(const uint8_t* data, size_t len);

// Hex-encoded SHA-256 digest.
std::string sha256_hex(std::string_view data);

// ceil(bytes / 4): the character-count token estimation heuristic.
size_t estimate_tokens(std::string_view text);

}  // namespace ctxshap

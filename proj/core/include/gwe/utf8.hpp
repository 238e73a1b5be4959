#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gwe::utf8 {

/// Decodes a UTF-8 string into codepoints. Throws a data error naming the
/// absolute byte offset (base_offset + local offset) of the first bad byte.
std::vector<char32_t> decode(std::string_view text, std::size_t base_offset = 0);

std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

/// "U+4E2D" style label.
std::string codepoint_label(char32_t cp);

/// Parses "U+4E2D" (or a single UTF-8 character). Throws on malformed input.
char32_t parse_codepoint(std::string_view text);

}  // namespace gwe::utf8

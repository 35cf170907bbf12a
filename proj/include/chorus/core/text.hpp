#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace chorus {

// ASCII alphanumerics, '_' and any non-ASCII byte count as word characters.
constexpr bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

// First case-insensitive (ASCII) occurrence of `needle` in `haystack` that is
// not glued to neighbouring word characters, starting at `from`.
std::optional<std::size_t> find_whole_word(std::string_view haystack, std::string_view needle, std::size_t from = 0);

// Code points in a UTF-8 string; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

// Byte offset just past the first `count` code points.
std::size_t utf8_offset(std::string_view s, std::size_t count);

std::string_view trim(std::string_view s);

}  // namespace chorus

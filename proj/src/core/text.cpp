#include "chorus/core/text.hpp"

#include <cctype>

namespace chorus {

namespace {

bool iequal_at(std::string_view h, std::size_t pos, std::string_view n) {
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(h[pos + i])) != std::tolower(static_cast<unsigned char>(n[i]))) {
            return false;
        }
    }
    return true;
}

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::optional<std::size_t> find_whole_word(std::string_view haystack, std::string_view needle, std::size_t from) {
    if (needle.empty() || needle.size() > haystack.size()) return std::nullopt;
    const bool check_front = is_word_byte(static_cast<unsigned char>(needle.front()));
    const bool check_back = is_word_byte(static_cast<unsigned char>(needle.back()));
    for (std::size_t pos = from; pos + needle.size() <= haystack.size(); ++pos) {
        if (!iequal_at(haystack, pos, needle)) continue;
        if (check_front && pos > 0 && is_word_byte(static_cast<unsigned char>(haystack[pos - 1]))) continue;
        const auto end = pos + needle.size();
        if (check_back && end < haystack.size() && is_word_byte(static_cast<unsigned char>(haystack[end]))) continue;
        return pos;
    }
    return std::nullopt;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); i = utf8_offset(s.substr(i), 1) + i) ++n;
    return n;
}

std::size_t utf8_offset(std::string_view s, std::size_t count) {
    std::size_t i = 0;
    while (count > 0 && i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        std::size_t width = 1;
        if (lead >= 0xF0 && lead < 0xF8) {
            width = 4;
        } else if (lead >= 0xE0) {
            width = lead < 0xF0 ? 3 : 1;
        } else if (lead >= 0xC0) {
            width = 2;
        }
        // Fall back to single bytes when the sequence is truncated or malformed.
        if (i + width > s.size()) width = 1;
        for (std::size_t k = 1; k < width; ++k) {
            if (!is_continuation(static_cast<unsigned char>(s[i + k]))) {
                width = 1;
                break;
            }
        }
        i += width;
        --count;
    }
    return i;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace chorus

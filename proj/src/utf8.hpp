#pragma once

#include <cstddef>
#include <string_view>

namespace agentnet::detail {

/// Length of the UTF-8 sequence introduced by lead byte `b`, 0 if `b` cannot lead.
constexpr std::size_t utf8_sequence_length(unsigned char b) {
    if (b < 0x80) return 1;
    if (b >= 0xC2 && b <= 0xDF) return 2;
    if (b >= 0xE0 && b <= 0xEF) return 3;
    if (b >= 0xF0 && b <= 0xF4) return 4;
    return 0;
}

inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto b0 = static_cast<unsigned char>(s[i]);
        auto len = utf8_sequence_length(b0);
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        if (len == 3) {
            auto b1 = static_cast<unsigned char>(s[i + 1]);
            if (b0 == 0xE0 && b1 < 0xA0) return false; // overlong
            if (b0 == 0xED && b1 >= 0xA0) return false; // surrogates
        } else if (len == 4) {
            auto b1 = static_cast<unsigned char>(s[i + 1]);
            if (b0 == 0xF0 && b1 < 0x90) return false;
            if (b0 == 0xF4 && b1 >= 0x90) return false;
        }
        i += len;
    }
    return true;
}

} // namespace agentnet::detail

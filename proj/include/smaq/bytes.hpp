#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smaq {

using ByteVec = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

inline std::string to_hex(ByteSpan data) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline ByteVec from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    ByteVec out;
    out.reserve(hex.size() / 2);
    int hi = -1;
    for (char c : hex) {
        if (c == ' ' || c == ':') continue;
        int v = nibble(c);
        if (v < 0) throw std::invalid_argument("from_hex: bad character");
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<uint8_t>((hi << 4) | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw std::invalid_argument("from_hex: odd length");
    return out;
}

inline void append(ByteVec& dst, ByteSpan src) { dst.insert(dst.end(), src.begin(), src.end()); }

inline void append(ByteVec& dst, std::string_view s) {
    dst.insert(dst.end(), s.begin(), s.end());
}

inline void put_u8(ByteVec& dst, uint8_t v) { dst.push_back(v); }

inline void put_u16(ByteVec& dst, uint16_t v) {
    dst.push_back(static_cast<uint8_t>(v >> 8));
    dst.push_back(static_cast<uint8_t>(v));
}

inline void put_u32(ByteVec& dst, uint32_t v) {
    for (int i = 3; i >= 0; --i) dst.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64(ByteVec& dst, uint64_t v) {
    for (int i = 7; i >= 0; --i) dst.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] << 8 | p[1]); }

inline uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

// Byte-wise needle search, used by the secrecy scans.
inline bool contains(ByteSpan haystack, ByteSpan needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    const void* p = memmem(haystack.data(), haystack.size(), needle.data(), needle.size());
    return p != nullptr;
}

}  // namespace smaq

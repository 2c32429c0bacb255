#pragma once

#include <cstdint>
#include <string_view>

#include "smaq/bytes.hpp"

namespace smaq::netem {

// xoshiro256** seeded through splitmix64; self-contained so that streams are
// identical across platforms and standard-library versions.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
    }

    uint64_t next() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return p > 0.0 && uniform() < p; }

    uint64_t below(uint64_t bound) { return bound == 0 ? 0 : next() % bound; }

    void fill(uint8_t* out, size_t len) {
        while (len >= 8) {
            uint64_t v = next();
            for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>(v >> (8 * i));
            out += 8;
            len -= 8;
        }
        if (len > 0) {
            uint64_t v = next();
            for (size_t i = 0; i < len; ++i) out[i] = static_cast<uint8_t>(v >> (8 * i));
        }
    }

    ByteVec bytes(size_t len) {
        ByteVec out(len);
        fill(out.data(), len);
        return out;
    }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Stable stream derivation: one named substream per purpose.
    static uint64_t derive(uint64_t seed, std::string_view name) {
        uint64_t h = seed ^ 0x9ae16a3b2f90404fULL;
        for (char c : name) {
            h ^= static_cast<uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        uint64_t x = h;
        return splitmix64(x);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
};

}  // namespace smaq::netem

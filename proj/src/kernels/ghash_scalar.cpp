#include <cstring>

#include "smaq/kernels/kernels.hpp"

namespace smaq::kernels {

namespace {

// GF(2^128) multiply, right-shift algorithm from the GCM definition.
// Bit 0 of an element is the most significant bit of byte 0.
void gf_mult(const uint8_t x[16], const uint8_t h[16], uint8_t out[16]) {
    uint8_t z[16] = {0};
    uint8_t v[16];
    memcpy(v, h, 16);
    for (int i = 0; i < 128; ++i) {
        if (x[i / 8] & (0x80u >> (i % 8))) {
            for (int j = 0; j < 16; ++j) z[j] ^= v[j];
        }
        bool lsb = v[15] & 1;
        for (int j = 15; j > 0; --j) v[j] = static_cast<uint8_t>((v[j] >> 1) | (v[j - 1] << 7));
        v[0] >>= 1;
        if (lsb) v[0] ^= 0xe1;
    }
    memcpy(out, z, 16);
}

// Multiply by x (one right shift with reduction).
void gf_mulx(uint8_t v[16]) {
    bool lsb = v[15] & 1;
    for (int j = 15; j > 0; --j) v[j] = static_cast<uint8_t>((v[j] >> 1) | (v[j - 1] << 7));
    v[0] >>= 1;
    if (lsb) v[0] ^= 0xe1;
}

// Reduction prefix applied to bytes 0..1 after shifting right by one nibble;
// indexed by the nibble that fell off. Derived once from gf_mulx.
struct NibbleReduction {
    uint16_t r[16];
    NibbleReduction() {
        for (int f = 0; f < 16; ++f) {
            uint8_t v[16] = {0};
            v[15] = static_cast<uint8_t>(f);
            for (int s = 0; s < 4; ++s) gf_mulx(v);
            r[f] = static_cast<uint16_t>((uint16_t(v[0]) << 8) | v[1]);
        }
    }
};

const NibbleReduction& nibble_reduction() {
    static NibbleReduction t;
    return t;
}

}  // namespace

void ghash_init(const uint8_t h[16], GhashKey& out) {
    memcpy(out.h, h, 16);
    // hpow[i] = H^(i+1), byte order as-is; the CLMUL path byte-swaps on load.
    memcpy(out.hpow[0], h, 16);
    for (int i = 1; i < 4; ++i) gf_mult(out.hpow[i - 1], h, out.hpow[i]);
    // 4-bit multiplication table: shoup[n] = (nibble n at x^0..x^3) * H.
    for (int n = 0; n < 16; ++n) {
        uint8_t e[16] = {0};
        e[0] = static_cast<uint8_t>(n << 4);
        gf_mult(e, h, out.shoup[n]);
    }
}

void ghash_update_reference(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len) {
    uint8_t acc[16];
    memcpy(acc, y, 16);
    for (size_t off = 0; off + 16 <= len; off += 16) {
        for (int i = 0; i < 16; ++i) acc[i] ^= data[off + i];
        uint8_t tmp[16];
        gf_mult(acc, key.h, tmp);
        memcpy(acc, tmp, 16);
    }
    memcpy(y, acc, 16);
}

void ghash_update_scalar(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len) {
    const NibbleReduction& red = nibble_reduction();
    uint8_t acc[16];
    memcpy(acc, y, 16);
    for (size_t off = 0; off + 16 <= len; off += 16) {
        for (int i = 0; i < 16; ++i) acc[i] ^= data[off + i];
        // Horner over 32 nibbles, low groups last.
        uint8_t z[16] = {0};
        for (int k = 31; k >= 0; --k) {
            if (k != 31) {
                uint8_t fell = z[15] & 0x0f;
                for (int j = 15; j > 0; --j)
                    z[j] = static_cast<uint8_t>((z[j] >> 4) | (z[j - 1] << 4));
                z[0] >>= 4;
                uint16_t r = red.r[fell];
                z[0] ^= static_cast<uint8_t>(r >> 8);
                z[1] ^= static_cast<uint8_t>(r);
            }
            int byte = k >> 1;
            uint8_t nib = (k & 1) ? (acc[byte] & 0x0f) : (acc[byte] >> 4);
            const uint8_t* te = key.shoup[nib];
            for (int j = 0; j < 16; ++j) z[j] ^= te[j];
        }
        memcpy(acc, z, 16);
    }
    memcpy(y, acc, 16);
}

}  // namespace smaq::kernels

// AES-NI and PCLMULQDQ variants. Compiled with -maes -mpclmul -mssse3; only
// reached after the runtime CPU check.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cstring>

#include "smaq/kernels/kernels.hpp"

namespace smaq::kernels {

namespace {

inline __m128i round_key(const Aes128Key& key, int r) {
    return _mm_loadu_si128(reinterpret_cast<const __m128i*>(key.rk_bytes + 16 * r));
}

inline __m128i encrypt_block(const Aes128Key& key, __m128i b) {
    b = _mm_xor_si128(b, round_key(key, 0));
    for (int r = 1; r <= 9; ++r) b = _mm_aesenc_si128(b, round_key(key, r));
    return _mm_aesenclast_si128(b, round_key(key, 10));
}

const __m128i kByteSwap = _mm_set_epi8(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);

// Carry-less GF(2^128) multiply with reduction; operands byte-reversed.
inline __m128i gfmul(__m128i a, __m128i b) {
    __m128i tmp3 = _mm_clmulepi64_si128(a, b, 0x00);
    __m128i tmp4 = _mm_clmulepi64_si128(a, b, 0x10);
    __m128i tmp5 = _mm_clmulepi64_si128(a, b, 0x01);
    __m128i tmp6 = _mm_clmulepi64_si128(a, b, 0x11);

    tmp4 = _mm_xor_si128(tmp4, tmp5);
    tmp5 = _mm_slli_si128(tmp4, 8);
    tmp4 = _mm_srli_si128(tmp4, 8);
    tmp3 = _mm_xor_si128(tmp3, tmp5);
    tmp6 = _mm_xor_si128(tmp6, tmp4);

    __m128i tmp7 = _mm_srli_epi32(tmp3, 31);
    __m128i tmp8 = _mm_srli_epi32(tmp6, 31);
    tmp3 = _mm_slli_epi32(tmp3, 1);
    tmp6 = _mm_slli_epi32(tmp6, 1);

    __m128i tmp9 = _mm_srli_si128(tmp7, 12);
    tmp8 = _mm_slli_si128(tmp8, 4);
    tmp7 = _mm_slli_si128(tmp7, 4);
    tmp3 = _mm_or_si128(tmp3, tmp7);
    tmp6 = _mm_or_si128(tmp6, tmp8);
    tmp6 = _mm_or_si128(tmp6, tmp9);

    tmp7 = _mm_slli_epi32(tmp3, 31);
    tmp8 = _mm_slli_epi32(tmp3, 30);
    tmp9 = _mm_slli_epi32(tmp3, 25);
    tmp7 = _mm_xor_si128(tmp7, tmp8);
    tmp7 = _mm_xor_si128(tmp7, tmp9);
    tmp8 = _mm_srli_si128(tmp7, 4);
    tmp7 = _mm_slli_si128(tmp7, 12);
    tmp3 = _mm_xor_si128(tmp3, tmp7);

    __m128i tmp2 = _mm_srli_epi32(tmp3, 1);
    tmp4 = _mm_srli_epi32(tmp3, 2);
    tmp5 = _mm_srli_epi32(tmp3, 7);
    tmp2 = _mm_xor_si128(tmp2, tmp4);
    tmp2 = _mm_xor_si128(tmp2, tmp5);
    tmp2 = _mm_xor_si128(tmp2, tmp8);
    tmp3 = _mm_xor_si128(tmp3, tmp2);
    tmp6 = _mm_xor_si128(tmp6, tmp3);
    return tmp6;
}

}  // namespace

void aes128_block_aesni(const Aes128Key& key, const uint8_t in[16], uint8_t out[16]) {
    __m128i b = _mm_loadu_si128(reinterpret_cast<const __m128i*>(in));
    b = encrypt_block(key, b);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out), b);
}

void aes128_ctr_xor_aesni(const Aes128Key& key, const uint8_t counter[16], uint8_t* buf,
                          size_t len) {
    uint8_t prefix[16];
    memcpy(prefix, counter, 16);
    uint32_t ctr = (uint32_t(prefix[12]) << 24) | (uint32_t(prefix[13]) << 16) |
                   (uint32_t(prefix[14]) << 8) | uint32_t(prefix[15]);
    auto make_block = [&](uint32_t c) {
        uint8_t blk[16];
        memcpy(blk, prefix, 12);
        blk[12] = static_cast<uint8_t>(c >> 24);
        blk[13] = static_cast<uint8_t>(c >> 16);
        blk[14] = static_cast<uint8_t>(c >> 8);
        blk[15] = static_cast<uint8_t>(c);
        return _mm_loadu_si128(reinterpret_cast<const __m128i*>(blk));
    };
    // 4-block pipeline
    while (len >= 64) {
        __m128i b0 = make_block(ctr), b1 = make_block(ctr + 1), b2 = make_block(ctr + 2),
                b3 = make_block(ctr + 3);
        __m128i rk = round_key(key, 0);
        b0 = _mm_xor_si128(b0, rk);
        b1 = _mm_xor_si128(b1, rk);
        b2 = _mm_xor_si128(b2, rk);
        b3 = _mm_xor_si128(b3, rk);
        for (int r = 1; r <= 9; ++r) {
            rk = round_key(key, r);
            b0 = _mm_aesenc_si128(b0, rk);
            b1 = _mm_aesenc_si128(b1, rk);
            b2 = _mm_aesenc_si128(b2, rk);
            b3 = _mm_aesenc_si128(b3, rk);
        }
        rk = round_key(key, 10);
        b0 = _mm_aesenclast_si128(b0, rk);
        b1 = _mm_aesenclast_si128(b1, rk);
        b2 = _mm_aesenclast_si128(b2, rk);
        b3 = _mm_aesenclast_si128(b3, rk);
        __m128i* p = reinterpret_cast<__m128i*>(buf);
        _mm_storeu_si128(p + 0, _mm_xor_si128(_mm_loadu_si128(p + 0), b0));
        _mm_storeu_si128(p + 1, _mm_xor_si128(_mm_loadu_si128(p + 1), b1));
        _mm_storeu_si128(p + 2, _mm_xor_si128(_mm_loadu_si128(p + 2), b2));
        _mm_storeu_si128(p + 3, _mm_xor_si128(_mm_loadu_si128(p + 3), b3));
        buf += 64;
        len -= 64;
        ctr += 4;
    }
    while (len > 0) {
        __m128i b = encrypt_block(key, make_block(ctr++));
        uint8_t pad[16];
        _mm_storeu_si128(reinterpret_cast<__m128i*>(pad), b);
        size_t take = len < 16 ? len : 16;
        for (size_t i = 0; i < take; ++i) buf[i] ^= pad[i];
        buf += take;
        len -= take;
    }
}

void ghash_update_clmul(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len) {
    __m128i h = _mm_shuffle_epi8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(key.h)),
                                 kByteSwap);
    __m128i acc = _mm_shuffle_epi8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(y)),
                                   kByteSwap);
    for (size_t off = 0; off + 16 <= len; off += 16) {
        __m128i d = _mm_shuffle_epi8(
            _mm_loadu_si128(reinterpret_cast<const __m128i*>(data + off)), kByteSwap);
        acc = gfmul(_mm_xor_si128(acc, d), h);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(y), _mm_shuffle_epi8(acc, kByteSwap));
}

}  // namespace smaq::kernels

#endif  // __x86_64__

// SHA-256 message schedule and rounds via the SHA extensions. Compiled with
// -msha -msse4.1; only reached after the runtime CPU check.

#if defined(__x86_64__)

#include <immintrin.h>

#include "smaq/kernels/kernels.hpp"

namespace smaq::kernels {

void sha256_compress_shani(uint32_t state[8], const uint8_t* blocks, size_t nblocks) {
    const __m128i kShuf = _mm_set_epi64x(0x0c0d0e0f08090a0bULL, 0x0405060700010203ULL);

    __m128i tmp = _mm_loadu_si128(reinterpret_cast<const __m128i*>(&state[0]));
    __m128i state1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(&state[4]));
    tmp = _mm_shuffle_epi32(tmp, 0xB1);       // CDAB
    state1 = _mm_shuffle_epi32(state1, 0x1B);  // EFGH
    __m128i state0 = _mm_alignr_epi8(tmp, state1, 8);  // ABEF
    state1 = _mm_blend_epi16(state1, tmp, 0xF0);       // CDGH

    static const uint64_t K[32] = {
        0x71374491428A2F98ULL, 0xE9B5DBA5B5C0FBCFULL, 0x59F111F13956C25BULL,
        0xAB1C5ED5923F82A4ULL, 0x12835B01D807AA98ULL, 0x550C7DC3243185BEULL,
        0x80DEB1FE72BE5D74ULL, 0xC19BF1749BDC06A7ULL, 0xEFBE4786E49B69C1ULL,
        0x240CA1CC0FC19DC6ULL, 0x4A7484AA2DE92C6FULL, 0x76F988DA5CB0A9DCULL,
        0xA831C66D983E5152ULL, 0xBF597FC7B00327C8ULL, 0xD5A79147C6E00BF3ULL,
        0x1429296706CA6351ULL, 0x2E1B213827B70A85ULL, 0x53380D134D2C6DFCULL,
        0x766A0ABB650A7354ULL, 0x92722C8581C2C92EULL, 0xA81A664BA2BFE8A1ULL,
        0xC76C51A3C24B8B70ULL, 0xD6990624D192E819ULL, 0x106AA070F40E3585ULL,
        0x1E376C0819A4C116ULL, 0x34B0BCB52748774CULL, 0x4ED8AA4A391C0CB3ULL,
        0x682E6FF35B9CCA4FULL, 0x78A5636F748F82EEULL, 0x8CC7020884C87814ULL,
        0xA4506CEB90BEFFFAULL, 0xC67178F2BEF9A3F7ULL};

    for (size_t blk = 0; blk < nblocks; ++blk) {
        const uint8_t* data = blocks + 64 * blk;
        const __m128i abef_save = state0;
        const __m128i cdgh_save = state1;

        __m128i msg, msgtmp0, msgtmp1, msgtmp2, msgtmp3;

        // Rounds 0-3
        msgtmp0 = _mm_shuffle_epi8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(data)),
                                   kShuf);
        msg = _mm_add_epi32(msgtmp0, _mm_set_epi64x(K[1], K[0]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);

        // Rounds 4-7
        msgtmp1 = _mm_shuffle_epi8(
            _mm_loadu_si128(reinterpret_cast<const __m128i*>(data + 16)), kShuf);
        msg = _mm_add_epi32(msgtmp1, _mm_set_epi64x(K[3], K[2]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);
        msgtmp0 = _mm_sha256msg1_epu32(msgtmp0, msgtmp1);

        // Rounds 8-11
        msgtmp2 = _mm_shuffle_epi8(
            _mm_loadu_si128(reinterpret_cast<const __m128i*>(data + 32)), kShuf);
        msg = _mm_add_epi32(msgtmp2, _mm_set_epi64x(K[5], K[4]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);
        msgtmp1 = _mm_sha256msg1_epu32(msgtmp1, msgtmp2);

        // Rounds 12-15
        msgtmp3 = _mm_shuffle_epi8(
            _mm_loadu_si128(reinterpret_cast<const __m128i*>(data + 48)), kShuf);
        msg = _mm_add_epi32(msgtmp3, _mm_set_epi64x(K[7], K[6]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        tmp = _mm_alignr_epi8(msgtmp3, msgtmp2, 4);
        msgtmp0 = _mm_add_epi32(msgtmp0, tmp);
        msgtmp0 = _mm_sha256msg2_epu32(msgtmp0, msgtmp3);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);
        msgtmp2 = _mm_sha256msg1_epu32(msgtmp2, msgtmp3);

        // Rounds 16-51: rotate the four message registers
        for (int i = 4; i < 13; ++i) {
            __m128i* cur;
            __m128i* next;
            __m128i* prev3;
            __m128i* msg1dst;
            switch (i % 4) {
                case 0:
                    cur = &msgtmp0; next = &msgtmp1; prev3 = &msgtmp3; msg1dst = &msgtmp3;
                    break;
                case 1:
                    cur = &msgtmp1; next = &msgtmp2; prev3 = &msgtmp0; msg1dst = &msgtmp0;
                    break;
                case 2:
                    cur = &msgtmp2; next = &msgtmp3; prev3 = &msgtmp1; msg1dst = &msgtmp1;
                    break;
                default:
                    cur = &msgtmp3; next = &msgtmp0; prev3 = &msgtmp2; msg1dst = &msgtmp2;
                    break;
            }
            msg = _mm_add_epi32(*cur, _mm_set_epi64x(K[2 * i + 1], K[2 * i]));
            state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
            tmp = _mm_alignr_epi8(*cur, *prev3, 4);
            *next = _mm_add_epi32(*next, tmp);
            *next = _mm_sha256msg2_epu32(*next, *cur);
            msg = _mm_shuffle_epi32(msg, 0x0E);
            state0 = _mm_sha256rnds2_epu32(state0, state1, msg);
            *msg1dst = _mm_sha256msg1_epu32(*msg1dst, *cur);
        }

        // Rounds 52-55
        msg = _mm_add_epi32(msgtmp1, _mm_set_epi64x(K[27], K[26]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        tmp = _mm_alignr_epi8(msgtmp1, msgtmp0, 4);
        msgtmp2 = _mm_add_epi32(msgtmp2, tmp);
        msgtmp2 = _mm_sha256msg2_epu32(msgtmp2, msgtmp1);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);

        // Rounds 56-59
        msg = _mm_add_epi32(msgtmp2, _mm_set_epi64x(K[29], K[28]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        tmp = _mm_alignr_epi8(msgtmp2, msgtmp1, 4);
        msgtmp3 = _mm_add_epi32(msgtmp3, tmp);
        msgtmp3 = _mm_sha256msg2_epu32(msgtmp3, msgtmp2);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);

        // Rounds 60-63
        msg = _mm_add_epi32(msgtmp3, _mm_set_epi64x(K[31], K[30]));
        state1 = _mm_sha256rnds2_epu32(state1, state0, msg);
        msg = _mm_shuffle_epi32(msg, 0x0E);
        state0 = _mm_sha256rnds2_epu32(state0, state1, msg);

        state0 = _mm_add_epi32(state0, abef_save);
        state1 = _mm_add_epi32(state1, cdgh_save);
    }

    tmp = _mm_shuffle_epi32(state0, 0x1B);       // FEBA
    state1 = _mm_shuffle_epi32(state1, 0xB1);    // DCHG
    state0 = _mm_blend_epi16(tmp, state1, 0xF0);  // DCBA
    state1 = _mm_alignr_epi8(state1, tmp, 8);     // HGFE

    _mm_storeu_si128(reinterpret_cast<__m128i*>(&state[0]), state0);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(&state[4]), state1);
}

}  // namespace smaq::kernels

#endif  // __x86_64__

#if defined(__x86_64__)

#include <immintrin.h>

#include "smaq/kernels/kernels.hpp"

namespace smaq::kernels {

void xor_bytes_avx2(uint8_t* dst, const uint8_t* src, size_t len) {
    while (len >= 32) {
        __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst));
        __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst), _mm256_xor_si256(a, b));
        dst += 32;
        src += 32;
        len -= 32;
    }
    for (size_t i = 0; i < len; ++i) dst[i] ^= src[i];
}

}  // namespace smaq::kernels

#endif  // __x86_64__

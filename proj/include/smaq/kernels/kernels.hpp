#pragma once

// Arithmetic inner loops for record and packet protection. Every operation has
// a portable scalar implementation and, on x86-64, a hardware variant selected
// at runtime (AES-NI, PCLMULQDQ, SHA extensions, AVX2). The dispatch table is
// resolved once; SMAQ_KERNELS=scalar forces the portable path.

#include <cstddef>
#include <cstdint>

namespace smaq::kernels {

struct Aes128Key {
    uint32_t rk[44];       // 11 round keys, big-endian words
    uint8_t rk_bytes[176];  // same schedule as raw bytes, for the AES-NI path
};

void aes128_expand_key(const uint8_t key[16], Aes128Key& out);

// GHASH key material: H plus precomputed tables for the fast paths.
struct GhashKey {
    uint8_t h[16];
    uint8_t hpow[4][16];    // H^1..H^4, used by the CLMUL path
    uint8_t shoup[16][16];  // 4-bit multiplication table, used by the scalar path
};

void ghash_init(const uint8_t h[16], GhashKey& out);

using Sha256CompressFn = void (*)(uint32_t state[8], const uint8_t* blocks, size_t nblocks);
using AesBlockFn = void (*)(const Aes128Key& key, const uint8_t in[16], uint8_t out[16]);
// XORs the AES-CTR keystream into buf. counter holds the full 16-byte initial
// counter block; the low 32 bits (big endian) increment per block.
using AesCtrXorFn = void (*)(const Aes128Key& key, const uint8_t counter[16], uint8_t* buf,
                             size_t len);
// Absorbs len bytes (len % 16 == 0) into the GHASH accumulator y.
using GhashUpdateFn = void (*)(const GhashKey& key, uint8_t y[16], const uint8_t* data,
                               size_t len);
using XorBytesFn = void (*)(uint8_t* dst, const uint8_t* src, size_t len);

struct KernelTable {
    const char* name;
    Sha256CompressFn sha256_compress;
    AesBlockFn aes128_block;
    AesCtrXorFn aes128_ctr_xor;
    GhashUpdateFn ghash_update;
    XorBytesFn xor_bytes;
};

const KernelTable& scalar_table();

struct CpuFeatures {
    bool aesni = false;
    bool pclmul = false;
    bool sha = false;
    bool avx2 = false;
};

CpuFeatures detect_cpu();

// Active table: hardware variants where the CPU supports them, scalar
// otherwise (or when SMAQ_KERNELS=scalar).
const KernelTable& active();

// Scalar reference entry points, exposed for equivalence tests.
void sha256_compress_scalar(uint32_t state[8], const uint8_t* blocks, size_t nblocks);
void aes128_block_scalar(const Aes128Key& key, const uint8_t in[16], uint8_t out[16]);
void aes128_ctr_xor_scalar(const Aes128Key& key, const uint8_t counter[16], uint8_t* buf,
                           size_t len);
void ghash_update_scalar(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len);
void xor_bytes_scalar(uint8_t* dst, const uint8_t* src, size_t len);

// Bit-by-bit GF(2^128) multiply straight from the GCM definition; test oracle
// for both the table-driven scalar path and the CLMUL path.
void ghash_update_reference(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len);

#if defined(__x86_64__)
bool x86_variants_available();  // compiled in and supported by this CPU
void sha256_compress_shani(uint32_t state[8], const uint8_t* blocks, size_t nblocks);
void aes128_block_aesni(const Aes128Key& key, const uint8_t in[16], uint8_t out[16]);
void aes128_ctr_xor_aesni(const Aes128Key& key, const uint8_t counter[16], uint8_t* buf,
                          size_t len);
void ghash_update_clmul(const GhashKey& key, uint8_t y[16], const uint8_t* data, size_t len);
void xor_bytes_avx2(uint8_t* dst, const uint8_t* src, size_t len);
#endif

// Convenience wrappers over the active table.
struct Sha256 {
    Sha256() { reset(); }
    void reset();
    void update(const uint8_t* data, size_t len);
    void final(uint8_t digest[32]);

  private:
    uint32_t state_[8];
    uint8_t buf_[64];
    size_t buf_len_ = 0;
    uint64_t total_ = 0;
};

void sha256(const uint8_t* data, size_t len, uint8_t digest[32]);

}  // namespace smaq::kernels

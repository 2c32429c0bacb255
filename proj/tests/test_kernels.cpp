#include <doctest.h>

#include <cstring>

#include "smaq/bytes.hpp"
#include "smaq/kernels/kernels.hpp"
#include "smaq/netem/rng.hpp"
#include "test_util.hpp"

using namespace smaq;
using namespace smaq::kernels;

TEST_CASE("sha256 known digests") {
    uint8_t digest[32];
    sha256(reinterpret_cast<const uint8_t*>("abc"), 3, digest);
    CHECK(to_hex(ByteSpan(digest, 32)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    sha256(nullptr, 0, digest);
    CHECK(to_hex(ByteSpan(digest, 32)) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    // Multi-block input: 1,000,000 'a' characters.
    Sha256 h;
    ByteVec chunk(1000, 'a');
    for (int i = 0; i < 1000; ++i) h.update(chunk.data(), chunk.size());
    h.final(digest);
    CHECK(to_hex(ByteSpan(digest, 32)) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("aes128 block matches the published example") {
    Aes128Key key;
    uint8_t kb[16];
    for (int i = 0; i < 16; ++i) kb[i] = static_cast<uint8_t>(i);
    aes128_expand_key(kb, key);
    ByteVec pt = from_hex("00112233445566778899aabbccddeeff");
    uint8_t out[16];
    aes128_block_scalar(key, pt.data(), out);
    CHECK(to_hex(ByteSpan(out, 16)) == "69c4e0d86a7b0430d8cdb78070b4c55a");
}

TEST_CASE("scalar ghash table path matches the bit-level reference") {
    netem::Rng rng(0x47a5);
    for (int iter = 0; iter < 50; ++iter) {
        uint8_t h[16];
        rng.fill(h, 16);
        GhashKey key;
        ghash_init(h, key);
        ByteVec data = rng.bytes(16 * (1 + rng.below(8)));
        uint8_t y1[16], y2[16];
        rng.fill(y1, 16);
        memcpy(y2, y1, 16);
        ghash_update_reference(key, y1, data.data(), data.size());
        ghash_update_scalar(key, y2, data.data(), data.size());
        CHECK(memcmp(y1, y2, 16) == 0);
    }
}

#if defined(__x86_64__)
TEST_CASE("hardware kernels agree with the scalar reference") {
    CpuFeatures f = detect_cpu();
    netem::Rng rng(0x1d0c);
    for (int iter = 0; iter < 40; ++iter) {
        size_t len = 1 + rng.below(4096);
        ByteVec buf = rng.bytes(len);

        if (f.aesni) {
            uint8_t kb[16], ctr[16];
            rng.fill(kb, 16);
            rng.fill(ctr, 16);
            Aes128Key key;
            aes128_expand_key(kb, key);
            uint8_t b1[16], b2[16];
            aes128_block_scalar(key, ctr, b1);
            aes128_block_aesni(key, ctr, b2);
            CHECK(memcmp(b1, b2, 16) == 0);
            ByteVec buf2 = buf;
            aes128_ctr_xor_scalar(key, ctr, buf.data(), buf.size());
            aes128_ctr_xor_aesni(key, ctr, buf2.data(), buf2.size());
            CHECK(buf == buf2);
        }
        if (f.pclmul) {
            uint8_t h[16], y1[16], y2[16];
            rng.fill(h, 16);
            rng.fill(y1, 16);
            memcpy(y2, y1, 16);
            GhashKey key;
            ghash_init(h, key);
            size_t blocks = (1 + rng.below(16)) * 16;
            ByteVec data = rng.bytes(blocks);
            ghash_update_reference(key, y1, data.data(), data.size());
            ghash_update_clmul(key, y2, data.data(), data.size());
            CHECK(memcmp(y1, y2, 16) == 0);
        }
        if (f.sha) {
            uint32_t s1[8], s2[8];
            for (int i = 0; i < 8; ++i) s1[i] = s2[i] = uint32_t(rng.next());
            size_t nblocks = 1 + rng.below(4);
            ByteVec data = rng.bytes(nblocks * 64);
            sha256_compress_scalar(s1, data.data(), nblocks);
            sha256_compress_shani(s2, data.data(), nblocks);
            CHECK(memcmp(s1, s2, sizeof(s1)) == 0);
        }
        if (f.avx2) {
            ByteVec a = rng.bytes(len), b = rng.bytes(len);
            ByteVec a2 = a;
            xor_bytes_scalar(a.data(), b.data(), len);
            xor_bytes_avx2(a2.data(), b.data(), len);
            CHECK(a == a2);
        }
    }
}
#endif

TEST_CASE("active kernel table is usable") {
    const KernelTable& t = active();
    CHECK(t.name != nullptr);
    uint8_t digest[32];
    sha256(reinterpret_cast<const uint8_t*>("abc"), 3, digest);
    CHECK(to_hex(ByteSpan(digest, 32)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

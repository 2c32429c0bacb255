#include "smaq/crypto/aead.hpp"

#include <cstring>
#include <stdexcept>

namespace smaq::crypto {

using namespace smaq::kernels;

Aead::Aead(ByteSpan key, ByteSpan iv) {
    if (key.size() != kAeadKeyLen || iv.size() != kAeadIvLen)
        throw std::invalid_argument("aead: bad key or iv length");
    aes128_expand_key(key.data(), key_);
    uint8_t h[16] = {0};
    active().aes128_block(key_, h, h);
    ghash_init(h, ghash_);
    memcpy(iv_, iv.data(), kAeadIvLen);
}

void Aead::nonce_for(uint64_t sequence, uint8_t out[kAeadIvLen]) const {
    memcpy(out, iv_, kAeadIvLen);
    for (int i = 0; i < 8; ++i)
        out[kAeadIvLen - 1 - i] ^= static_cast<uint8_t>(sequence >> (8 * i));
}

void Aead::compute_tag(const uint8_t nonce[kAeadIvLen], ByteSpan aad, ByteSpan ciphertext,
                       uint8_t tag[kAeadTagLen]) const {
    const KernelTable& k = active();
    uint8_t y[16] = {0};
    uint8_t block[16];
    // AAD, zero padded to a full block.
    size_t full = aad.size() & ~size_t{15};
    if (full > 0) k.ghash_update(ghash_, y, aad.data(), full);
    if (aad.size() > full) {
        memset(block, 0, 16);
        memcpy(block, aad.data() + full, aad.size() - full);
        k.ghash_update(ghash_, y, block, 16);
    }
    // Ciphertext, zero padded.
    full = ciphertext.size() & ~size_t{15};
    if (full > 0) k.ghash_update(ghash_, y, ciphertext.data(), full);
    if (ciphertext.size() > full) {
        memset(block, 0, 16);
        memcpy(block, ciphertext.data() + full, ciphertext.size() - full);
        k.ghash_update(ghash_, y, block, 16);
    }
    // Lengths in bits.
    uint64_t aad_bits = uint64_t(aad.size()) * 8;
    uint64_t ct_bits = uint64_t(ciphertext.size()) * 8;
    for (int i = 0; i < 8; ++i) {
        block[i] = static_cast<uint8_t>(aad_bits >> (56 - 8 * i));
        block[8 + i] = static_cast<uint8_t>(ct_bits >> (56 - 8 * i));
    }
    k.ghash_update(ghash_, y, block, 16);
    // E(K, J0) where J0 = nonce || 0x00000001
    uint8_t j0[16];
    memcpy(j0, nonce, 12);
    j0[12] = 0;
    j0[13] = 0;
    j0[14] = 0;
    j0[15] = 1;
    uint8_t ej0[16];
    k.aes128_block(key_, j0, ej0);
    for (int i = 0; i < 16; ++i) tag[i] = y[i] ^ ej0[i];
}

void Aead::seal(uint64_t sequence, ByteSpan aad, ByteSpan plaintext, ByteVec& out) const {
    uint8_t nonce[kAeadIvLen];
    nonce_for(sequence, nonce);
    size_t ct_off = out.size();
    out.resize(ct_off + plaintext.size() + kAeadTagLen);
    uint8_t* ct = out.data() + ct_off;
    if (!plaintext.empty()) memcpy(ct, plaintext.data(), plaintext.size());
    uint8_t counter[16];
    memcpy(counter, nonce, 12);
    counter[12] = 0;
    counter[13] = 0;
    counter[14] = 0;
    counter[15] = 2;
    active().aes128_ctr_xor(key_, counter, ct, plaintext.size());
    compute_tag(nonce, aad, ByteSpan(ct, plaintext.size()), ct + plaintext.size());
}

std::optional<ByteVec> Aead::open(uint64_t sequence, ByteSpan aad, ByteSpan sealed) const {
    if (sealed.size() < kAeadTagLen) return std::nullopt;
    uint8_t nonce[kAeadIvLen];
    nonce_for(sequence, nonce);
    ByteSpan ciphertext = sealed.subspan(0, sealed.size() - kAeadTagLen);
    uint8_t expected[kAeadTagLen];
    compute_tag(nonce, aad, ciphertext, expected);
    if (memcmp(expected, sealed.data() + ciphertext.size(), kAeadTagLen) != 0)
        return std::nullopt;
    ByteVec plain(ciphertext.begin(), ciphertext.end());
    uint8_t counter[16];
    memcpy(counter, nonce, 12);
    counter[12] = 0;
    counter[13] = 0;
    counter[14] = 0;
    counter[15] = 2;
    active().aes128_ctr_xor(key_, counter, plain.data(), plain.size());
    return plain;
}

}  // namespace smaq::crypto

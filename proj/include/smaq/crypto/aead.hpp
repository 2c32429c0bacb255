#pragma once

#include <optional>

#include "smaq/bytes.hpp"
#include "smaq/kernels/kernels.hpp"

namespace smaq::crypto {

inline constexpr size_t kAeadKeyLen = 16;
inline constexpr size_t kAeadIvLen = 12;
inline constexpr size_t kAeadTagLen = 16;

// AES-128-GCM with a 96-bit nonce.
class Aead {
  public:
    Aead() = default;
    Aead(ByteSpan key, ByteSpan iv);

    // Appends ciphertext || tag to out.
    void seal(uint64_t sequence, ByteSpan aad, ByteSpan plaintext, ByteVec& out) const;

    // Returns plaintext, or nullopt on authentication failure.
    std::optional<ByteVec> open(uint64_t sequence, ByteSpan aad, ByteSpan sealed) const;

    // Nonce = iv XOR big-endian sequence (in the low 8 bytes).
    void nonce_for(uint64_t sequence, uint8_t out[kAeadIvLen]) const;

  private:
    void compute_tag(const uint8_t nonce[kAeadIvLen], ByteSpan aad, ByteSpan ciphertext,
                     uint8_t tag[kAeadTagLen]) const;

    kernels::Aes128Key key_{};
    kernels::GhashKey ghash_{};
    uint8_t iv_[kAeadIvLen] = {0};
};

}  // namespace smaq::crypto

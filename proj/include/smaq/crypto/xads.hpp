#pragma once

#include <optional>

#include "smaq/crypto/aead.hpp"
#include "smaq/crypto/key_schedule.hpp"

namespace smaq::crypto {

// Record framing over stream bytes: a 5-octet header (content type 23,
// legacy version 0x0303, ciphertext length) followed by payload ciphertext,
// one inner content-type octet and a 16-octet tag. Fixed overhead: 22 octets.
inline constexpr size_t kXadsMaxPayload = size_t{1} << 14;
inline constexpr size_t kXadsHeaderLen = 5;
inline constexpr size_t kXadsOverhead = kXadsHeaderLen + kAeadTagLen + 1;
inline constexpr uint8_t kXadsContentType = 23;

// Single-record protection. sequence is the per-(stream, phase) record
// counter feeding the AEAD nonce.
ByteVec protect_record(ByteSpan payload, const Secret& secret, uint64_t sequence);

// Inverse; nullopt on any authentication or framing failure.
std::optional<ByteVec> unprotect_record(ByteSpan record, const Secret& secret,
                                        uint64_t sequence);

// One direction of one stream: chunks application bytes into records on the
// way out, reassembles records from arbitrarily segmented stream bytes on the
// way in. Both ends advance the sequence implicitly.
class XadsSealer {
  public:
    explicit XadsSealer(Secret secret);
    // Appends one or more records covering data to out.
    void seal(ByteSpan data, ByteVec& out);
    void key_update();
    uint64_t sequence() const { return seq_; }

  private:
    Secret secret_;
    Aead aead_;
    uint64_t seq_ = 0;
};

class XadsOpener {
  public:
    explicit XadsOpener(Secret secret);
    // Feeds raw stream bytes; appends recovered payload bytes to out.
    // Returns false on an authentication failure (fatal for the stream).
    bool feed(ByteSpan stream_bytes, ByteVec& out);
    void key_update();
    uint64_t sequence() const { return seq_; }

  private:
    Secret secret_;
    Aead aead_;
    uint64_t seq_ = 0;
    ByteVec pending_;
};

Aead record_aead(const Secret& secret);

}  // namespace smaq::crypto

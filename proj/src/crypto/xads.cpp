#include "smaq/crypto/xads.hpp"

#include <cstring>
#include <stdexcept>

namespace smaq::crypto {

Aead record_aead(const Secret& secret) {
    ByteVec key = hkdf_expand_label(secret.bytes, "key", {}, kAeadKeyLen);
    ByteVec iv = hkdf_expand_label(secret.bytes, "iv", {}, kAeadIvLen);
    return Aead(key, iv);
}

namespace {

void seal_one(const Aead& aead, ByteSpan payload, uint64_t seq, ByteVec& out) {
    size_t ct_len = payload.size() + 1 + kAeadTagLen;
    uint8_t header[kXadsHeaderLen];
    header[0] = kXadsContentType;
    header[1] = 0x03;
    header[2] = 0x03;
    header[3] = static_cast<uint8_t>(ct_len >> 8);
    header[4] = static_cast<uint8_t>(ct_len);
    out.insert(out.end(), header, header + kXadsHeaderLen);
    ByteVec inner(payload.begin(), payload.end());
    inner.push_back(kXadsContentType);
    aead.seal(seq, ByteSpan(header, kXadsHeaderLen), inner, out);
}

}  // namespace

ByteVec protect_record(ByteSpan payload, const Secret& secret, uint64_t sequence) {
    if (payload.size() > kXadsMaxPayload)
        throw std::invalid_argument("protect_record: payload exceeds 2^14 octets");
    ByteVec out;
    out.reserve(payload.size() + kXadsOverhead);
    seal_one(record_aead(secret), payload, sequence, out);
    return out;
}

std::optional<ByteVec> unprotect_record(ByteSpan record, const Secret& secret,
                                        uint64_t sequence) {
    if (record.size() < kXadsOverhead) return std::nullopt;
    if (record[0] != kXadsContentType || record[1] != 0x03 || record[2] != 0x03)
        return std::nullopt;
    size_t ct_len = (size_t(record[3]) << 8) | record[4];
    if (record.size() != kXadsHeaderLen + ct_len) return std::nullopt;
    Aead aead = record_aead(secret);
    auto inner = aead.open(sequence, record.subspan(0, kXadsHeaderLen),
                           record.subspan(kXadsHeaderLen));
    if (!inner || inner->empty() || inner->back() != kXadsContentType) return std::nullopt;
    inner->pop_back();
    return inner;
}

XadsSealer::XadsSealer(Secret secret)
    : secret_(std::move(secret)), aead_(record_aead(secret_)) {}

void XadsSealer::seal(ByteSpan data, ByteVec& out) {
    size_t off = 0;
    do {
        size_t take = std::min(data.size() - off, kXadsMaxPayload);
        seal_one(aead_, data.subspan(off, take), seq_++, out);
        off += take;
    } while (off < data.size());
}

void XadsSealer::key_update() {
    secret_ = crypto::key_update(secret_);
    aead_ = record_aead(secret_);
    seq_ = 0;
}

XadsOpener::XadsOpener(Secret secret)
    : secret_(std::move(secret)), aead_(record_aead(secret_)) {}

bool XadsOpener::feed(ByteSpan stream_bytes, ByteVec& out) {
    append(pending_, stream_bytes);
    size_t off = 0;
    while (pending_.size() - off >= kXadsHeaderLen) {
        const uint8_t* h = pending_.data() + off;
        if (h[0] != kXadsContentType || h[1] != 0x03 || h[2] != 0x03) return false;
        size_t ct_len = (size_t(h[3]) << 8) | h[4];
        if (ct_len < kAeadTagLen + 1 || ct_len > kXadsMaxPayload + kAeadTagLen + 1) return false;
        if (pending_.size() - off < kXadsHeaderLen + ct_len) break;
        auto inner = aead_.open(seq_, ByteSpan(h, kXadsHeaderLen),
                                ByteSpan(h + kXadsHeaderLen, ct_len));
        if (!inner || inner->empty() || inner->back() != kXadsContentType) return false;
        ++seq_;
        out.insert(out.end(), inner->begin(), inner->end() - 1);
        off += kXadsHeaderLen + ct_len;
    }
    pending_.erase(pending_.begin(), pending_.begin() + off);
    return true;
}

void XadsOpener::key_update() {
    secret_ = crypto::key_update(secret_);
    aead_ = record_aead(secret_);
    seq_ = 0;
}

}  // namespace smaq::crypto

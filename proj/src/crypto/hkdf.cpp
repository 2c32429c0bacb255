#include "smaq/crypto/hkdf.hpp"

#include <cstring>

#include "smaq/kernels/kernels.hpp"

namespace smaq::crypto {

ByteVec hmac_sha256(ByteSpan key, ByteSpan data) {
    uint8_t k[64] = {0};
    if (key.size() > 64) {
        kernels::sha256(key.data(), key.size(), k);
    } else {
        memcpy(k, key.data(), key.size());
    }
    uint8_t ipad[64], opad[64];
    for (int i = 0; i < 64; ++i) {
        ipad[i] = k[i] ^ 0x36;
        opad[i] = k[i] ^ 0x5c;
    }
    kernels::Sha256 inner;
    inner.update(ipad, 64);
    inner.update(data.data(), data.size());
    uint8_t inner_digest[32];
    inner.final(inner_digest);
    kernels::Sha256 outer;
    outer.update(opad, 64);
    outer.update(inner_digest, 32);
    ByteVec out(32);
    outer.final(out.data());
    return out;
}

ByteVec hkdf_extract(ByteSpan salt, ByteSpan ikm) { return hmac_sha256(salt, ikm); }

ByteVec hkdf_expand(ByteSpan prk, ByteSpan info, size_t length) {
    if (length > 255 * kHashLen) throw std::invalid_argument("hkdf_expand: length too large");
    ByteVec out;
    out.reserve(length);
    ByteVec t;
    uint8_t counter = 1;
    while (out.size() < length) {
        ByteVec block;
        block.reserve(t.size() + info.size() + 1);
        append(block, t);
        append(block, info);
        block.push_back(counter++);
        t = hmac_sha256(prk, block);
        size_t take = std::min(t.size(), length - out.size());
        out.insert(out.end(), t.begin(), t.begin() + take);
    }
    return out;
}

ByteVec hkdf_expand_label(ByteSpan secret, std::string_view label, ByteSpan context,
                          size_t length) {
    static constexpr std::string_view kPrefix = "tls13 ";
    if (label.size() + kPrefix.size() > 249)
        throw std::invalid_argument("hkdf_expand_label: label too long");
    if (context.size() > 255) throw std::invalid_argument("hkdf_expand_label: context too long");
    if (length > 0xffff) throw std::invalid_argument("hkdf_expand_label: length too large");
    ByteVec info;
    info.reserve(4 + kPrefix.size() + label.size() + context.size());
    put_u16(info, static_cast<uint16_t>(length));
    put_u8(info, static_cast<uint8_t>(kPrefix.size() + label.size()));
    append(info, kPrefix);
    append(info, label);
    put_u8(info, static_cast<uint8_t>(context.size()));
    append(info, context);
    return hkdf_expand(secret, info, length);
}

}  // namespace smaq::crypto

#pragma once

#include <string_view>

#include "smaq/bytes.hpp"

namespace smaq::crypto {

inline constexpr size_t kHashLen = 32;  // SHA-256

ByteVec hmac_sha256(ByteSpan key, ByteSpan data);

ByteVec hkdf_extract(ByteSpan salt, ByteSpan ikm);

// RFC 5869 HKDF-Expand. length <= 255 * 32.
ByteVec hkdf_expand(ByteSpan prk, ByteSpan info, size_t length);

// RFC 8446 style labeled expansion: the info block is
//   u16 length || u8 len("tls13 " + label) || that string || u8 len(context) || context
// label must fit in 249 octets once prefixed.
ByteVec hkdf_expand_label(ByteSpan secret, std::string_view label, ByteSpan context,
                          size_t length);

}  // namespace smaq::crypto

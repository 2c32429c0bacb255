#include <doctest.h>

#include "smaq/crypto/aead.hpp"
#include "smaq/crypto/xads.hpp"
#include "smaq/netem/rng.hpp"
#include "test_util.hpp"

using namespace smaq;
using namespace smaq::crypto;

TEST_CASE("aes-128-gcm matches the frozen vectors") {
    auto cases = test::load_vector_file("tests/vectors/aes128_gcm.txt");
    REQUIRE(cases.size() == 4);
    for (const auto& c : cases) {
        CAPTURE(c.at("case"));
        Aead aead(test::hexfield(c, "key"), test::hexfield(c, "iv"));
        ByteVec aad = test::hexfield(c, "aad");
        ByteVec pt = test::hexfield(c, "pt");
        ByteVec sealed;
        aead.seal(0, aad, pt, sealed);
        REQUIRE(sealed.size() == pt.size() + kAeadTagLen);
        CHECK(to_hex(ByteSpan(sealed.data(), pt.size())) == c.at("ct"));
        CHECK(to_hex(ByteSpan(sealed.data() + pt.size(), kAeadTagLen)) == c.at("tag"));
        auto opened = aead.open(0, aad, sealed);
        REQUIRE(opened.has_value());
        CHECK(*opened == pt);
    }
}

namespace {

Secret test_secret(uint8_t fill) { return Secret(ByteVec(32, fill), "test/secret"); }

}  // namespace

TEST_CASE("xads record round-trip over random payloads") {
    netem::Rng rng(0xbead);
    Secret secret = test_secret(0x42);
    for (int i = 0; i < 1000; ++i) {
        size_t len = rng.below(kXadsMaxPayload + 1);
        ByteVec payload = rng.bytes(len);
        uint64_t seq = rng.below(1 << 20);
        ByteVec record = protect_record(payload, secret, seq);
        CHECK(record.size() == payload.size() + kXadsOverhead);
        auto back = unprotect_record(record, secret, seq);
        REQUIRE(back.has_value());
        CHECK(*back == payload);
    }
}

TEST_CASE("xads record overhead is exactly 22 octets") {
    Secret secret = test_secret(1);
    for (size_t len : {size_t{0}, size_t{1}, size_t{100}, size_t{16383}, kXadsMaxPayload}) {
        ByteVec record = protect_record(ByteVec(len, 0xcc), secret, 0);
        CHECK(record.size() - len == kXadsOverhead);
    }
    // Max payload: 16406-octet record, ~0.134 % overhead.
    ByteVec record = protect_record(ByteVec(kXadsMaxPayload, 0), secret, 7);
    CHECK(record.size() == 16406);
    double ratio = double(kXadsOverhead) / double(record.size());
    CHECK(ratio > 0.0013);
    CHECK(ratio < 0.0014);
    CHECK_THROWS_AS(protect_record(ByteVec(kXadsMaxPayload + 1, 0), secret, 0),
                    std::invalid_argument);
}

TEST_CASE("any bit flip fails authentication") {
    netem::Rng rng(0x77);
    Secret secret = test_secret(9);
    ByteVec payload = rng.bytes(300);
    ByteVec record = protect_record(payload, secret, 5);
    for (int i = 0; i < 64; ++i) {
        ByteVec corrupted = record;
        size_t pos = rng.below(corrupted.size());
        corrupted[pos] ^= static_cast<uint8_t>(1u << rng.below(8));
        CHECK_FALSE(unprotect_record(corrupted, secret, 5).has_value());
    }
    // Wrong sequence and wrong phase also fail.
    CHECK_FALSE(unprotect_record(record, secret, 6).has_value());
    CHECK_FALSE(unprotect_record(record, key_update(secret), 5).has_value());
}

TEST_CASE("sealer/opener stream with fragmentation and key updates") {
    netem::Rng rng(0x15ce);
    Secret secret = test_secret(0x33);
    XadsSealer sealer(secret);
    XadsOpener opener(secret);
    ByteVec wire;
    ByteVec sent;
    for (int i = 0; i < 8; ++i) {
        ByteVec chunk = rng.bytes(1 + rng.below(40000));
        append(sent, chunk);
        sealer.seal(chunk, wire);
    }
    // Feed in odd-sized fragments.
    ByteVec got;
    size_t off = 0;
    while (off < wire.size()) {
        size_t take = std::min(wire.size() - off, size_t(1 + rng.below(700)));
        REQUIRE(opener.feed(ByteSpan(wire.data() + off, take), got));
        off += take;
    }
    CHECK(got == sent);

    // Key update: both sides advance, traffic continues.
    sealer.key_update();
    opener.key_update();
    ByteVec wire2, got2;
    sealer.seal(ByteVec(100, 0xEE), wire2);
    REQUIRE(opener.feed(wire2, got2));
    CHECK(got2 == ByteVec(100, 0xEE));

    // Stale keys on one side fail.
    XadsOpener stale(secret);
    ByteVec sink;
    CHECK_FALSE(stale.feed(wire2, sink));
}

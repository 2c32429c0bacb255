#include <doctest.h>

#include "smaq/crypto/key_schedule.hpp"
#include "smaq/netem/network.hpp"
#include "smaq/netem/rng.hpp"
#include "smaq/transport/wire.hpp"

using namespace smaq;
using namespace smaq::transport;

TEST_CASE("varint round trip and sizes") {
    netem::Rng rng(3);
    for (uint64_t v : {uint64_t{0}, uint64_t{63}, uint64_t{64}, uint64_t{16383}, uint64_t{16384},
                       (uint64_t{1} << 30) - 1, uint64_t{1} << 30, (uint64_t{1} << 62) - 1}) {
        ByteVec buf;
        put_varint(buf, v);
        CHECK(buf.size() == varint_size(v));
        size_t off = 0;
        auto back = get_varint(buf, off);
        REQUIRE(back.has_value());
        CHECK(*back == v);
        CHECK(off == buf.size());
    }
    ByteVec buf;
    CHECK_THROWS_AS(put_varint(buf, uint64_t{1} << 62), std::invalid_argument);
}

TEST_CASE("initial packet serializes to the documented layout") {
    Packet pkt;
    pkt.space = Space::initial;
    pkt.dcid = from_hex("0102030405060708");
    pkt.packet_number = 0;
    pkt.frames.push_back(PingFrame{});
    ByteVec wire = serialize_packet(pkt, nullptr);

    // Hand-built expectation: type octet (space initial=0, format version 1),
    // cid length, cid, pn varint 0, then the PING frame TLV (type 1, len 0).
    ByteVec expected = from_hex("01" "08" "0102030405060708" "00" "01" "00");
    CHECK(to_hex(wire) == to_hex(expected));

    auto parsed = parse_packet(wire, nullptr);
    REQUIRE(parsed.has_value());
    CHECK(parsed->space == Space::initial);
    CHECK(parsed->dcid == pkt.dcid);
    CHECK(parsed->packet_number == 0);
    REQUIRE(parsed->frames.size() == 1);
    CHECK(std::holds_alternative<PingFrame>(parsed->frames[0]));
}

namespace {

PacketProtection make_protection(uint8_t fill) {
    crypto::Secret traffic(ByteVec(32, fill), "test/traffic");
    crypto::PacketKeys keys = crypto::derive_packet_keys(traffic);
    PacketProtection prot{crypto::Aead(keys.key, keys.iv), ByteVec(8, uint8_t(fill ^ 0x5f))};
    return prot;
}

}  // namespace

TEST_CASE("application packets round trip through AEAD and header protection") {
    PacketProtection prot = make_protection(0x21);
    netem::Rng rng(44);
    for (int i = 0; i < 50; ++i) {
        Packet pkt;
        pkt.space = Space::application;
        pkt.dcid = rng.bytes(1 + rng.below(20));
        pkt.packet_number = rng.below(1 << 28);
        AckFrame ack;
        ack.ranges.push_back(AckRange{40, 60});
        ack.ranges.push_back(AckRange{10, 20});
        ack.ranges.push_back(AckRange{3, 3});
        pkt.frames.push_back(ack);
        StreamFrame sf;
        sf.stream_id = 4 * rng.below(8);
        sf.offset = rng.below(1 << 20);
        sf.fin = rng.below(2) == 1;
        sf.data = rng.bytes(rng.below(900));
        pkt.frames.push_back(sf);
        pkt.frames.push_back(PathChallengeFrame{rng.next()});

        ByteVec wire = serialize_packet(pkt, &prot);
        auto parsed = parse_packet(wire, &prot);
        REQUIRE(parsed.has_value());
        CHECK(parsed->packet_number == pkt.packet_number);
        REQUIRE(parsed->frames.size() == 3);
        const auto& ack2 = std::get<AckFrame>(parsed->frames[0]);
        CHECK(ack2.ranges.size() == 3);
        CHECK(ack2.ranges[0].hi == 60);
        CHECK(ack2.ranges[1].lo == 10);
        CHECK(ack2.ranges[2].hi == 3);
        const auto& sf2 = std::get<StreamFrame>(parsed->frames[1]);
        CHECK(sf2.stream_id == sf.stream_id);
        CHECK(sf2.offset == sf.offset);
        CHECK(sf2.fin == sf.fin);
        CHECK(sf2.data == sf.data);

        // Tampering or the wrong keys fail to parse.
        ByteVec bad = wire;
        bad[bad.size() / 2] ^= 1;
        CHECK_FALSE(parse_packet(bad, &prot).has_value());
        PacketProtection other = make_protection(0x22);
        CHECK_FALSE(parse_packet(wire, &other).has_value());
    }
}

TEST_CASE("crypto stub carries the handshake fields") {
    Packet pkt;
    pkt.space = Space::handshake;
    pkt.dcid = from_hex("aa");
    pkt.packet_number = 3;
    CryptoStubFrame cs;
    cs.quic_version = 1;
    cs.cipher_suite = 0x1301;
    cs.random = ByteVec(32, 0x7e);
    cs.scid = from_hex("deadbeef");
    cs.reset_token = ByteVec(16, 0x44);
    cs.transport_params["smaq"] = 1;
    cs.transport_params["max_ack_delay_ms"] = 1;
    pkt.frames.push_back(cs);
    ByteVec wire = serialize_packet(pkt, nullptr);
    auto parsed = parse_packet(wire, nullptr);
    REQUIRE(parsed.has_value());
    const auto& cs2 = std::get<CryptoStubFrame>(parsed->frames[0]);
    CHECK(cs2.quic_version == 1);
    CHECK(cs2.cipher_suite == 0x1301);
    CHECK(cs2.random == cs.random);
    CHECK(cs2.scid == cs.scid);
    CHECK(cs2.reset_token == cs.reset_token);
    CHECK(cs2.transport_params == cs.transport_params);
    CHECK(datagram_tag_for(pkt) == 0);
    Packet ping;
    ping.frames.push_back(PingFrame{});
    ping.frames.push_back(HandshakeDoneFrame{});
    CHECK((datagram_tag_for(ping) & netem::tag_ping) != 0);
    CHECK((datagram_tag_for(ping) & netem::tag_handshake_done) != 0);
}

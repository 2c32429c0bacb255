#include <doctest.h>

#include "smaq/crypto/key_schedule.hpp"
#include "smaq/kernels/kernels.hpp"
#include "test_util.hpp"

using namespace smaq;
using namespace smaq::crypto;

namespace {

Secret zero_exporter() { return Secret(ByteVec(32, 0), "test/exporter"); }

}  // namespace

TEST_CASE("xads master derivation matches the golden vector and the raw route") {
    auto cases = test::load_vector_file("tests/vectors/xads_schedule.txt");
    REQUIRE(!cases.empty());
    const auto& c = cases.front();
    REQUIRE(c.at("case") == "zero_exporter");

    Secret master = derive_xads_master(zero_exporter());
    CHECK(to_hex(master.bytes) == c.at("xads_master"));

    // Independent route: exporter construction from raw hkdf_expand calls.
    uint8_t empty_hash[32];
    kernels::sha256(nullptr, 0, empty_hash);
    ByteSpan eh(empty_hash, 32);
    ByteVec derived = hkdf_expand_label(ByteVec(32, 0), "EXPORTER-smaq-xads-master", eh, 32);
    ByteVec manual = hkdf_expand_label(derived, "exporter", eh, 32);
    CHECK(to_hex(manual) == c.at("xads_master"));

    // Stream secrets and the key-update chain, against the same golden file.
    Secret c0 = derive_stream_secret(master, Sender::client, 0);
    CHECK(to_hex(c0.bytes) == c.at("client_xse_0_secret_0"));
    Secret s0 = derive_stream_secret(master, Sender::server, 0);
    CHECK(to_hex(s0.bytes) == c.at("server_xse_0_secret_0"));
    Secret c4 = derive_stream_secret(master, Sender::client, 4);
    CHECK(to_hex(c4.bytes) == c.at("client_xse_4_secret_0"));
    Secret c0p1 = key_update(c0);
    CHECK(to_hex(c0p1.bytes) == c.at("client_xse_0_secret_1"));
    Secret c0p2 = key_update(c0p1);
    CHECK(to_hex(c0p2.bytes) == c.at("client_xse_0_secret_2"));
}

TEST_CASE("derive_xads_master basic properties") {
    Secret m1 = derive_xads_master(zero_exporter());
    Secret m2 = derive_xads_master(zero_exporter());
    CHECK(m1.bytes == m2.bytes);
    Secret other = derive_xads_master(Secret(ByteVec(32, 7), "test/exporter2"));
    CHECK(m1.bytes != other.bytes);
}

TEST_CASE("stream secrets are independent across direction and stream id") {
    Secret master = derive_xads_master(zero_exporter());
    Secret c0 = derive_stream_secret(master, Sender::client, 0);
    Secret s0 = derive_stream_secret(master, Sender::server, 0);
    Secret c4 = derive_stream_secret(master, Sender::client, 4);
    CHECK(c0.bytes != s0.bytes);
    CHECK(c0.bytes != c4.bytes);
    CHECK(s0.bytes != c4.bytes);
    CHECK_THROWS_AS(derive_stream_secret(master, Sender::client, uint64_t{1} << 62),
                    std::invalid_argument);
}

TEST_CASE("key_update is non-idempotent and lane-isolated") {
    XadsKeySchedule sched(derive_xads_master(zero_exporter()));
    ByteVec c0 = sched.stream_secret(Sender::client, 0).bytes;
    ByteVec s0 = sched.stream_secret(Sender::server, 0).bytes;
    ByteVec c4 = sched.stream_secret(Sender::client, 4).bytes;

    sched.update(Sender::client, 0);
    CHECK(sched.phase(Sender::client, 0) == 1);
    CHECK(sched.phase(Sender::server, 0) == 0);
    ByteVec c0p1 = sched.stream_secret(Sender::client, 0).bytes;
    CHECK(c0p1 != c0);
    CHECK(sched.stream_secret(Sender::server, 0).bytes == s0);
    CHECK(sched.stream_secret(Sender::client, 4).bytes == c4);

    sched.update(Sender::client, 0);
    ByteVec c0p2 = sched.stream_secret(Sender::client, 0).bytes;
    CHECK(c0p2 != c0p1);
    CHECK(sched.phase(Sender::client, 0) == 2);

    // Applying once vs twice differs.
    Secret base(ByteVec(32, 3), "x/phase0");
    CHECK(key_update(base).bytes != key_update(key_update(base)).bytes);
}

TEST_CASE("transport schedule derives equal keys on both sides") {
    ByteVec cr(32, 0xAA), sr(32, 0xBB);
    TransportKeys a = derive_transport_keys(cr, sr);
    TransportKeys b = derive_transport_keys(cr, sr);
    CHECK(a.client_traffic.bytes == b.client_traffic.bytes);
    CHECK(a.server_traffic.bytes == b.server_traffic.bytes);
    CHECK(a.exporter_master.bytes == b.exporter_master.bytes);
    CHECK(a.client_traffic.bytes != a.server_traffic.bytes);
    CHECK(a.client_hp.bytes != a.server_hp.bytes);
    PacketKeys pk = derive_packet_keys(a.client_traffic);
    CHECK(pk.key.size() == 16);
    CHECK(pk.iv.size() == 12);
}

#include <doctest.h>

#include "smaq/handover/oob.hpp"
#include "smaq/handover/state.hpp"

using namespace smaq;
using namespace smaq::handover;

namespace {

SmaqState sample_state() {
    SmaqState st;
    st.active_cids.push_back({0, from_hex("0102030405060708"), 0});
    st.active_cids.push_back({1, from_hex("a1a2a3a4a5a6a7a8"), 0});
    st.stateless_reset_tokens.push_back(
        {from_hex("0102030405060708"), ByteVec(16, 0x11)});
    st.stateless_reset_tokens.push_back(
        {from_hex("a1a2a3a4a5a6a7a8"), ByteVec(16, 0x22)});
    st.quic_version = 1;
    st.cipher_suite = 0x1301;
    st.key_phase = 0;
    st.client_traffic_secret = ByteVec(32, 0xc1);
    st.server_traffic_secret = ByteVec(32, 0x51);
    st.client_hp_key = ByteVec(32, 0xc2);
    st.server_hp_key = ByteVec(32, 0x52);
    st.client_addr = {netem::kClient, 40000};
    st.server_addr = {netem::kServer, 443};
    st.client_params = {{"max_ack_delay_ms", 1}, {"smaq", 1}};
    st.server_params = {{"max_ack_delay_ms", 1}, {"smaq", 1}};
    st.client_highest_sent = 1;
    st.client_highest_recv = 3;
    st.server_highest_sent = 3;
    st.server_highest_recv = 1;
    return st;
}

}  // namespace

TEST_CASE("state serialization round-trips field-exact") {
    SmaqState st = sample_state();
    ByteVec bytes = st.serialize();
    auto back = SmaqState::deserialize(bytes);
    REQUIRE(back.has_value());
    CHECK(*back == st);
    // Deterministic encoding.
    CHECK(back->serialize() == bytes);
}

TEST_CASE("state serializes to the documented layout") {
    // Spot-check the envelope and the fixed-size fields against a hand-built
    // expectation: magic, format version, then tag-length-value fields in
    // table order.
    SmaqState st = sample_state();
    ByteVec bytes = st.serialize();
    REQUIRE(bytes.size() > 5);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SMAQ");
    CHECK(bytes[4] == 1);
    // Field 1 (active cids): tag, varint length, count, then entries.
    CHECK(bytes[5] == 1);
    // count 2, owner 0, len 8, cid...
    CHECK(bytes[7] == 2);
    CHECK(bytes[8] == 0);
    CHECK(bytes[9] == 8);
    CHECK(ByteVec(bytes.begin() + 10, bytes.begin() + 18) ==
          from_hex("0102030405060708"));
}

TEST_CASE("truncated, corrupted or extended state objects are rejected") {
    ByteVec bytes = sample_state().serialize();
    for (size_t cut : {size_t{3}, size_t{10}, bytes.size() - 1}) {
        CHECK_FALSE(SmaqState::deserialize(ByteSpan(bytes.data(), cut)).has_value());
    }
    ByteVec unknown_field = bytes;
    unknown_field.push_back(42);  // unknown field id
    unknown_field.push_back(0);
    CHECK_FALSE(SmaqState::deserialize(unknown_field).has_value());
    ByteVec bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_FALSE(SmaqState::deserialize(bad_magic).has_value());
}

TEST_CASE("restore compatibility checks produce the three error reasons") {
    SmaqState st = sample_state();
    MboxSupport support;
    CHECK_FALSE(check_restorable(st, support).has_value());

    SmaqState bad_version = st;
    bad_version.quic_version = 2;
    CHECK(check_restorable(bad_version, support) == SmaqErrorReason::version_unsupported);

    SmaqState bad_cipher = st;
    bad_cipher.cipher_suite = 0x1399;
    CHECK(check_restorable(bad_cipher, support) == SmaqErrorReason::cipher_unsupported);

    SmaqState bad_param = st;
    bad_param.client_params["reserved_experiment"] = 1;
    CHECK(check_restorable(bad_param, support) ==
          SmaqErrorReason::transport_parameter_unsupported);
    SmaqState bad_server_param = st;
    bad_server_param.server_params["odd_extension"] = 3;
    CHECK(check_restorable(bad_server_param, support) ==
          SmaqErrorReason::transport_parameter_unsupported);
}

TEST_CASE("transitive alteration changes exactly the client address field") {
    SmaqState st = sample_state();
    SmaqState altered = alter_client_address(st, {netem::kPep1, 20001});
    CHECK(altered.client_addr.node == netem::kPep1);
    CHECK(altered.client_addr.port == 20001);
    SmaqState expect = st;
    expect.client_addr = altered.client_addr;
    CHECK(altered == expect);
    // Byte-level: the serializations differ only within the address field.
    ByteVec a = st.serialize(), b = altered.serialize();
    REQUIRE(a.size() == b.size());
    size_t differing = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++differing;
    CHECK(differing <= 3);  // node octet and the two port octets
}

TEST_CASE("restore info maps the handed-over identity onto both facades") {
    SmaqState st = sample_state();
    transport::RestoreInfo info = to_restore_info(st);
    CHECK(info.client_cid == from_hex("0102030405060708"));
    CHECK(info.server_cid == from_hex("a1a2a3a4a5a6a7a8"));
    CHECK(info.client_reset_token == ByteVec(16, 0x11));
    CHECK(info.server_reset_token == ByteVec(16, 0x22));
    CHECK(info.client_traffic.bytes == ByteVec(32, 0xc1));
    CHECK(info.server_traffic.bytes == ByteVec(32, 0x51));
    CHECK(info.client_addr.port == 40000);
    CHECK(info.server_addr.port == 443);
    CHECK(info.client_params.smaq());
}

TEST_CASE("oob messages encode and decode") {
    OobMessage m;
    m.type = OobType::state_offer;
    m.session = 7;
    m.payload = sample_state().serialize();
    auto back = decode_oob(encode_oob(m));
    REQUIRE(back.has_value());
    CHECK(back->type == OobType::state_offer);
    CHECK(back->session == 7);
    CHECK(back->payload == m.payload);
    CHECK_FALSE(decode_oob(ByteVec{9, 0, 0, 0, 0}).has_value());
}

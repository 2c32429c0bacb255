#include "smaq/handover/state.hpp"

#include "smaq/transport/wire.hpp"

namespace smaq::handover {

using transport::get_varint;
using transport::put_varint;

namespace {

constexpr uint8_t kStateFormatVersion = 1;

enum FieldId : uint8_t {
    f_active_cids = 1,
    f_reset_tokens = 2,
    f_quic_version = 3,
    f_cipher_suite = 4,
    f_key_phase = 5,
    f_traffic_secrets = 6,
    f_hp_keys = 7,
    f_endpoint_addrs = 8,
    f_transport_params = 9,
    f_packet_numbers = 10,
};

void put_field(ByteVec& out, uint8_t id, const ByteVec& body) {
    out.push_back(id);
    put_varint(out, body.size());
    append(out, body);
}

void put_params(ByteVec& out, const std::map<std::string, uint64_t>& params) {
    put_varint(out, params.size());
    for (const auto& [name, value] : params) {
        put_u8(out, static_cast<uint8_t>(name.size()));
        append(out, name);
        put_varint(out, value);
    }
}

bool get_params(ByteSpan in, size_t& off, std::map<std::string, uint64_t>& out) {
    auto count = get_varint(in, off);
    if (!count) return false;
    for (uint64_t i = 0; i < *count; ++i) {
        if (off >= in.size()) return false;
        uint8_t n = in[off++];
        if (off + n > in.size()) return false;
        std::string name(in.begin() + off, in.begin() + off + n);
        off += n;
        auto value = get_varint(in, off);
        if (!value) return false;
        out[name] = *value;
    }
    return true;
}

void put_addr(ByteVec& out, const Address& a) {
    put_u8(out, a.node);
    put_u16(out, a.port);
}

bool get_addr(ByteSpan in, size_t& off, Address& a) {
    if (off + 3 > in.size()) return false;
    a.node = in[off];
    a.port = get_u16(in.data() + off + 1);
    off += 3;
    return true;
}

}  // namespace

ByteVec SmaqState::serialize() const {
    ByteVec out;
    append(out, std::string_view("SMAQ"));
    out.push_back(kStateFormatVersion);

    ByteVec body;
    put_u8(body, static_cast<uint8_t>(active_cids.size()));
    for (const auto& e : active_cids) {
        put_u8(body, e.owner);
        put_u8(body, static_cast<uint8_t>(e.cid.size()));
        append(body, e.cid);
        put_varint(body, e.sequence);
    }
    put_field(out, f_active_cids, body);

    body.clear();
    put_u8(body, static_cast<uint8_t>(stateless_reset_tokens.size()));
    for (const auto& e : stateless_reset_tokens) {
        put_u8(body, static_cast<uint8_t>(e.cid.size()));
        append(body, e.cid);
        append(body, e.token);
    }
    put_field(out, f_reset_tokens, body);

    body.clear();
    put_u32(body, quic_version);
    put_field(out, f_quic_version, body);

    body.clear();
    put_u16(body, cipher_suite);
    put_field(out, f_cipher_suite, body);

    body.clear();
    put_varint(body, key_phase);
    put_field(out, f_key_phase, body);

    body.clear();
    append(body, client_traffic_secret);
    append(body, server_traffic_secret);
    put_field(out, f_traffic_secrets, body);

    body.clear();
    append(body, client_hp_key);
    append(body, server_hp_key);
    put_field(out, f_hp_keys, body);

    body.clear();
    put_addr(body, client_addr);
    put_addr(body, server_addr);
    put_field(out, f_endpoint_addrs, body);

    body.clear();
    put_params(body, client_params);
    put_params(body, server_params);
    put_field(out, f_transport_params, body);

    body.clear();
    put_varint(body, client_highest_sent);
    put_varint(body, client_highest_recv);
    put_varint(body, server_highest_sent);
    put_varint(body, server_highest_recv);
    put_field(out, f_packet_numbers, body);

    return out;
}

std::optional<SmaqState> SmaqState::deserialize(ByteSpan in) {
    if (in.size() < 5 || memcmp(in.data(), "SMAQ", 4) != 0 || in[4] != kStateFormatVersion)
        return std::nullopt;
    SmaqState st;
    size_t off = 5;
    bool seen[11] = {false};
    while (off < in.size()) {
        uint8_t id = in[off++];
        auto len = get_varint(in, off);
        if (!len || off + *len > in.size()) return std::nullopt;
        ByteSpan body = in.subspan(off, *len);
        off += *len;
        size_t p = 0;
        switch (id) {
            case f_active_cids: {
                if (p >= body.size()) return std::nullopt;
                uint8_t count = body[p++];
                for (int i = 0; i < count; ++i) {
                    CidEntry e;
                    if (p + 2 > body.size()) return std::nullopt;
                    e.owner = body[p++];
                    uint8_t n = body[p++];
                    if (p + n > body.size()) return std::nullopt;
                    e.cid.assign(body.begin() + p, body.begin() + p + n);
                    p += n;
                    auto seq = get_varint(body, p);
                    if (!seq) return std::nullopt;
                    e.sequence = *seq;
                    st.active_cids.push_back(std::move(e));
                }
                break;
            }
            case f_reset_tokens: {
                if (p >= body.size()) return std::nullopt;
                uint8_t count = body[p++];
                for (int i = 0; i < count; ++i) {
                    TokenEntry e;
                    if (p + 1 > body.size()) return std::nullopt;
                    uint8_t n = body[p++];
                    if (p + n + 16 > body.size()) return std::nullopt;
                    e.cid.assign(body.begin() + p, body.begin() + p + n);
                    p += n;
                    e.token.assign(body.begin() + p, body.begin() + p + 16);
                    p += 16;
                    st.stateless_reset_tokens.push_back(std::move(e));
                }
                break;
            }
            case f_quic_version:
                if (body.size() != 4) return std::nullopt;
                st.quic_version = get_u32(body.data());
                break;
            case f_cipher_suite:
                if (body.size() != 2) return std::nullopt;
                st.cipher_suite = get_u16(body.data());
                break;
            case f_key_phase: {
                auto v = get_varint(body, p);
                if (!v) return std::nullopt;
                st.key_phase = *v;
                break;
            }
            case f_traffic_secrets:
                if (body.size() != 64) return std::nullopt;
                st.client_traffic_secret.assign(body.begin(), body.begin() + 32);
                st.server_traffic_secret.assign(body.begin() + 32, body.end());
                break;
            case f_hp_keys:
                if (body.size() != 64) return std::nullopt;
                st.client_hp_key.assign(body.begin(), body.begin() + 32);
                st.server_hp_key.assign(body.begin() + 32, body.end());
                break;
            case f_endpoint_addrs:
                if (!get_addr(body, p, st.client_addr) || !get_addr(body, p, st.server_addr))
                    return std::nullopt;
                break;
            case f_transport_params:
                if (!get_params(body, p, st.client_params) ||
                    !get_params(body, p, st.server_params))
                    return std::nullopt;
                break;
            case f_packet_numbers: {
                auto a = get_varint(body, p);
                auto b = get_varint(body, p);
                auto c = get_varint(body, p);
                auto d = get_varint(body, p);
                if (!a || !b || !c || !d) return std::nullopt;
                st.client_highest_sent = *a;
                st.client_highest_recv = *b;
                st.server_highest_sent = *c;
                st.server_highest_recv = *d;
                break;
            }
            default:
                return std::nullopt;  // unknown field: reject
        }
        if (id <= 10) seen[id] = true;
    }
    for (int i = 1; i <= 10; ++i)
        if (!seen[i]) return std::nullopt;
    return st;
}

SmaqState create_state(const transport::Connection& conn) {
    if (!conn.keys_ready()) throw StateNotReadyError();
    SmaqState st;
    st.active_cids.push_back({0, conn.client_cid(), conn.client_cid_seq()});
    st.active_cids.push_back({1, conn.server_cid(), conn.server_cid_seq()});
    st.stateless_reset_tokens.push_back({conn.client_cid(), conn.client_reset_token()});
    st.stateless_reset_tokens.push_back({conn.server_cid(), conn.server_reset_token()});
    st.quic_version = conn.quic_version();
    st.cipher_suite = conn.cipher_suite();
    st.key_phase = conn.key_phase();
    st.client_traffic_secret = conn.client_traffic_secret().bytes;
    st.server_traffic_secret = conn.server_traffic_secret().bytes;
    st.client_hp_key = conn.client_hp_secret().bytes;
    st.server_hp_key = conn.server_hp_secret().bytes;
    st.client_addr = conn.local_address();
    st.server_addr = conn.active_path();
    st.client_params = conn.local_params().map;
    st.server_params = conn.peer_params().map;
    st.client_highest_sent = conn.highest_sent_pn(true);
    st.client_highest_recv = conn.highest_recv_pn(true);
    st.server_highest_sent = conn.highest_sent_pn(false);
    st.server_highest_recv = conn.highest_recv_pn(false);
    return st;
}

const char* smaq_error_name(SmaqErrorReason r) {
    switch (r) {
        case SmaqErrorReason::version_unsupported: return "version-unsupported";
        case SmaqErrorReason::cipher_unsupported: return "cipher-unsupported";
        case SmaqErrorReason::transport_parameter_unsupported:
            return "transport-parameter-unsupported";
    }
    return "?";
}

std::optional<SmaqErrorReason> check_restorable(const SmaqState& state,
                                                const MboxSupport& support) {
    if (!support.quic_versions.count(state.quic_version))
        return SmaqErrorReason::version_unsupported;
    if (!support.cipher_suites.count(state.cipher_suite))
        return SmaqErrorReason::cipher_unsupported;
    auto supported = [&](const std::string& name) {
        return support.param_supported ? support.param_supported(name)
                                       : transport::transport_param_supported(name);
    };
    for (const auto& [name, value] : state.client_params) {
        (void)value;
        if (!supported(name)) return SmaqErrorReason::transport_parameter_unsupported;
    }
    for (const auto& [name, value] : state.server_params) {
        (void)value;
        if (!supported(name)) return SmaqErrorReason::transport_parameter_unsupported;
    }
    return std::nullopt;
}

transport::RestoreInfo to_restore_info(const SmaqState& state) {
    transport::RestoreInfo info;
    info.quic_version = state.quic_version;
    info.cipher_suite = state.cipher_suite;
    info.key_phase = state.key_phase;
    info.client_traffic = crypto::Secret(state.client_traffic_secret, "restored/client/traffic");
    info.server_traffic = crypto::Secret(state.server_traffic_secret, "restored/server/traffic");
    info.client_hp = crypto::Secret(state.client_hp_key, "restored/client/hp");
    info.server_hp = crypto::Secret(state.server_hp_key, "restored/server/hp");
    for (const auto& e : state.active_cids) {
        if (e.owner == 0) {
            info.client_cid = e.cid;
            info.client_cid_seq = e.sequence;
        } else {
            info.server_cid = e.cid;
            info.server_cid_seq = e.sequence;
        }
    }
    for (const auto& e : state.stateless_reset_tokens) {
        if (e.cid == info.client_cid) info.client_reset_token = e.token;
        if (e.cid == info.server_cid) info.server_reset_token = e.token;
    }
    info.client_params.map = state.client_params;
    info.server_params.map = state.server_params;
    info.client_highest_sent = state.client_highest_sent;
    info.client_highest_recv = state.client_highest_recv;
    info.server_highest_sent = state.server_highest_sent;
    info.server_highest_recv = state.server_highest_recv;
    info.client_addr = state.client_addr;
    info.server_addr = state.server_addr;
    return info;
}

SmaqState alter_client_address(const SmaqState& state, const Address& new_client_addr) {
    SmaqState altered = state;
    altered.client_addr = new_client_addr;
    return altered;
}

}  // namespace smaq::handover

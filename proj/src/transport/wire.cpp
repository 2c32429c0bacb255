#include "smaq/transport/wire.hpp"

#include <cstring>

#include "smaq/kernels/kernels.hpp"
#include "smaq/netem/network.hpp"

namespace smaq::transport {

void put_varint(ByteVec& out, uint64_t v) {
    if (v < (1ull << 6)) {
        out.push_back(static_cast<uint8_t>(v));
    } else if (v < (1ull << 14)) {
        out.push_back(static_cast<uint8_t>(0x40 | (v >> 8)));
        out.push_back(static_cast<uint8_t>(v));
    } else if (v < (1ull << 30)) {
        out.push_back(static_cast<uint8_t>(0x80 | (v >> 24)));
        out.push_back(static_cast<uint8_t>(v >> 16));
        out.push_back(static_cast<uint8_t>(v >> 8));
        out.push_back(static_cast<uint8_t>(v));
    } else if (v < (1ull << 62)) {
        out.push_back(static_cast<uint8_t>(0xc0 | (v >> 56)));
        for (int i = 6; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    } else {
        throw std::invalid_argument("varint: value out of range");
    }
}

size_t varint_size(uint64_t v) {
    if (v < (1ull << 6)) return 1;
    if (v < (1ull << 14)) return 2;
    if (v < (1ull << 30)) return 4;
    return 8;
}

std::optional<uint64_t> get_varint(ByteSpan in, size_t& off) {
    if (off >= in.size()) return std::nullopt;
    uint8_t first = in[off];
    size_t len = size_t{1} << (first >> 6);
    if (off + len > in.size()) return std::nullopt;
    uint64_t v = first & 0x3f;
    for (size_t i = 1; i < len; ++i) v = (v << 8) | in[off + i];
    off += len;
    return v;
}

bool frame_is_ack_eliciting(const Frame& f) {
    return !std::holds_alternative<AckFrame>(f) && !std::holds_alternative<PaddingFrame>(f) &&
           !std::holds_alternative<ConnectionCloseFrame>(f);
}

namespace {

void serialize_body(const Frame& f, ByteVec& out) {
    std::visit(
        [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, PaddingFrame>) {
                out.resize(out.size() + v.length, 0);
            } else if constexpr (std::is_same_v<T, PingFrame> ||
                                 std::is_same_v<T, HandshakeDoneFrame>) {
                // empty body
            } else if constexpr (std::is_same_v<T, AckFrame>) {
                put_varint(out, v.largest());
                put_varint(out, v.ranges.size());
                uint64_t prev_lo = 0;
                for (size_t i = 0; i < v.ranges.size(); ++i) {
                    const AckRange& r = v.ranges[i];
                    if (i == 0) {
                        put_varint(out, r.hi - r.lo);
                    } else {
                        put_varint(out, prev_lo - r.hi - 1);  // gap
                        put_varint(out, r.hi - r.lo);
                    }
                    prev_lo = r.lo;
                }
            } else if constexpr (std::is_same_v<T, CryptoStubFrame>) {
                put_u32(out, v.quic_version);
                put_u16(out, v.cipher_suite);
                put_u8(out, v.finished ? 1 : 0);
                put_u8(out, static_cast<uint8_t>(v.random.size()));
                append(out, v.random);
                put_u8(out, static_cast<uint8_t>(v.scid.size()));
                append(out, v.scid);
                put_u8(out, static_cast<uint8_t>(v.reset_token.size()));
                append(out, v.reset_token);
                put_varint(out, v.transport_params.size());
                for (const auto& [name, value] : v.transport_params) {
                    put_u8(out, static_cast<uint8_t>(name.size()));
                    append(out, name);
                    put_varint(out, value);
                }
            } else if constexpr (std::is_same_v<T, StreamFrame>) {
                put_varint(out, v.stream_id);
                put_varint(out, v.offset);
                put_u8(out, v.fin ? 1 : 0);
                append(out, v.data);
            } else if constexpr (std::is_same_v<T, PathChallengeFrame> ||
                                 std::is_same_v<T, PathResponseFrame>) {
                put_u64(out, v.token);
            } else if constexpr (std::is_same_v<T, ConnectionCloseFrame>) {
                put_varint(out, v.code);
                put_varint(out, v.reason.size());
                append(out, v.reason);
            }
        },
        f);
}

FrameType frame_type(const Frame& f) {
    if (std::holds_alternative<PaddingFrame>(f)) return FrameType::padding;
    if (std::holds_alternative<PingFrame>(f)) return FrameType::ping;
    if (std::holds_alternative<AckFrame>(f)) return FrameType::ack;
    if (std::holds_alternative<CryptoStubFrame>(f)) return FrameType::crypto_stub;
    if (std::holds_alternative<StreamFrame>(f)) return FrameType::stream;
    if (std::holds_alternative<PathChallengeFrame>(f)) return FrameType::path_challenge;
    if (std::holds_alternative<PathResponseFrame>(f)) return FrameType::path_response;
    if (std::holds_alternative<ConnectionCloseFrame>(f)) return FrameType::connection_close;
    return FrameType::handshake_done;
}

}  // namespace

void serialize_frame(const Frame& f, ByteVec& out) {
    out.push_back(static_cast<uint8_t>(frame_type(f)));
    ByteVec body;
    serialize_body(f, body);
    put_varint(out, body.size());
    append(out, body);
}

std::optional<Frame> parse_frame(ByteSpan in, size_t& off) {
    if (off >= in.size()) return std::nullopt;
    uint8_t type = in[off++];
    auto len = get_varint(in, off);
    if (!len || off + *len > in.size()) return std::nullopt;
    ByteSpan body = in.subspan(off, *len);
    off += *len;
    size_t p = 0;
    auto need_u8 = [&]() -> std::optional<uint8_t> {
        if (p >= body.size()) return std::nullopt;
        return body[p++];
    };
    switch (static_cast<FrameType>(type)) {
        case FrameType::padding:
            return Frame{PaddingFrame{static_cast<uint32_t>(*len)}};
        case FrameType::ping:
            return Frame{PingFrame{}};
        case FrameType::handshake_done:
            return Frame{HandshakeDoneFrame{}};
        case FrameType::ack: {
            AckFrame ack;
            auto largest = get_varint(body, p);
            auto count = get_varint(body, p);
            if (!largest || !count) return std::nullopt;
            uint64_t hi = *largest;
            uint64_t prev_lo = 0;
            for (uint64_t i = 0; i < *count; ++i) {
                if (i > 0) {
                    auto gap = get_varint(body, p);
                    if (!gap) return std::nullopt;
                    if (prev_lo < *gap + 1) return std::nullopt;
                    hi = prev_lo - *gap - 1;
                }
                auto span = get_varint(body, p);
                if (!span || *span > hi) return std::nullopt;
                AckRange r{hi - *span, hi};
                ack.ranges.push_back(r);
                prev_lo = r.lo;
            }
            return Frame{std::move(ack)};
        }
        case FrameType::crypto_stub: {
            CryptoStubFrame cs;
            if (body.size() < 7) return std::nullopt;
            cs.quic_version = get_u32(body.data());
            cs.cipher_suite = get_u16(body.data() + 4);
            p = 6;
            auto fin = need_u8();
            if (!fin) return std::nullopt;
            cs.finished = *fin != 0;
            for (ByteVec* field : {&cs.random, &cs.scid, &cs.reset_token}) {
                auto n = need_u8();
                if (!n || p + *n > body.size()) return std::nullopt;
                field->assign(body.begin() + p, body.begin() + p + *n);
                p += *n;
            }
            auto count = get_varint(body, p);
            if (!count) return std::nullopt;
            for (uint64_t i = 0; i < *count; ++i) {
                auto n = need_u8();
                if (!n || p + *n > body.size()) return std::nullopt;
                std::string name(body.begin() + p, body.begin() + p + *n);
                p += *n;
                auto value = get_varint(body, p);
                if (!value) return std::nullopt;
                cs.transport_params[name] = *value;
            }
            return Frame{std::move(cs)};
        }
        case FrameType::stream: {
            StreamFrame sf;
            auto id = get_varint(body, p);
            auto off2 = get_varint(body, p);
            auto fin = p < body.size() ? std::optional<uint8_t>(body[p++]) : std::nullopt;
            if (!id || !off2 || !fin) return std::nullopt;
            sf.stream_id = *id;
            sf.offset = *off2;
            sf.fin = *fin != 0;
            sf.data.assign(body.begin() + p, body.end());
            return Frame{std::move(sf)};
        }
        case FrameType::path_challenge:
        case FrameType::path_response: {
            if (body.size() != 8) return std::nullopt;
            uint64_t token = get_u64(body.data());
            if (static_cast<FrameType>(type) == FrameType::path_challenge)
                return Frame{PathChallengeFrame{token}};
            return Frame{PathResponseFrame{token}};
        }
        case FrameType::connection_close: {
            ConnectionCloseFrame cc;
            auto code = get_varint(body, p);
            auto rlen = get_varint(body, p);
            if (!code || !rlen || p + *rlen > body.size()) return std::nullopt;
            cc.code = *code;
            cc.reason.assign(body.begin() + p, body.begin() + p + *rlen);
            return Frame{std::move(cc)};
        }
    }
    return std::nullopt;
}

namespace {

// Header-protection mask over the packet-number field: the first byte keeps
// its 2-bit varint length prefix in the clear, remaining bits and bytes are
// XORed with the key-derived mask.
void mask_pn(uint8_t* pn, size_t pn_len, ByteSpan mask) {
    pn[0] ^= mask[0] & 0x3f;
    for (size_t i = 1; i < pn_len && i < mask.size(); ++i) pn[i] ^= mask[i];
}

}  // namespace

ByteVec serialize_packet(const Packet& pkt, const PacketProtection* prot) {
    if (pkt.dcid.empty() || pkt.dcid.size() > kMaxCidLen)
        throw std::invalid_argument("packet: bad dcid length");
    ByteVec out;
    out.push_back(static_cast<uint8_t>((static_cast<uint8_t>(pkt.space) << 6) | kWireVersion));
    out.push_back(static_cast<uint8_t>(pkt.dcid.size()));
    append(out, pkt.dcid);
    size_t pn_off = out.size();
    put_varint(out, pkt.packet_number);
    size_t pn_len = out.size() - pn_off;
    ByteVec payload;
    for (const Frame& f : pkt.frames) serialize_frame(f, payload);
    if (pkt.space == Space::application) {
        if (prot == nullptr) throw std::invalid_argument("packet: missing protection keys");
        ByteVec header = out;  // AAD: header with the packet number in the clear
        prot->aead.seal(pkt.packet_number, header, payload, out);
        mask_pn(out.data() + pn_off, pn_len, prot->hp_mask);
    } else {
        append(out, payload);
    }
    return out;
}

std::optional<ParsedHeader> peek_header(ByteSpan in) {
    if (in.size() < 3) return std::nullopt;
    if ((in[0] & 0x3f) != kWireVersion) return std::nullopt;
    uint8_t space = in[0] >> 6;
    if (space > 2) return std::nullopt;
    size_t cid_len = in[1];
    if (cid_len == 0 || cid_len > kMaxCidLen || 2 + cid_len >= in.size()) return std::nullopt;
    ParsedHeader h;
    h.space = static_cast<Space>(space);
    h.dcid.assign(in.begin() + 2, in.begin() + 2 + cid_len);
    h.pn_offset = 2 + cid_len;
    return h;
}

std::optional<Packet> parse_packet(ByteSpan in, const PacketProtection* prot) {
    auto header = peek_header(in);
    if (!header) return std::nullopt;
    ByteVec buf(in.begin(), in.end());
    size_t off = header->pn_offset;
    size_t pn_len = size_t{1} << (buf[off] >> 6);
    if (off + pn_len > buf.size()) return std::nullopt;
    if (header->space == Space::application) {
        if (prot == nullptr) return std::nullopt;
        mask_pn(buf.data() + off, pn_len, prot->hp_mask);
    }
    size_t pn_off = off;
    auto pn = get_varint(buf, off);
    if (!pn) return std::nullopt;
    Packet pkt;
    pkt.space = header->space;
    pkt.dcid = std::move(header->dcid);
    pkt.packet_number = *pn;
    (void)pn_off;
    ByteSpan body(buf.data() + off, buf.size() - off);
    ByteVec opened;
    if (header->space == Space::application) {
        auto plain = prot->aead.open(*pn, ByteSpan(buf.data(), off), body);
        if (!plain) return std::nullopt;
        opened = std::move(*plain);
        body = opened;
    }
    size_t p = 0;
    while (p < body.size()) {
        auto f = parse_frame(body, p);
        if (!f) return std::nullopt;
        if (!std::holds_alternative<PaddingFrame>(*f)) pkt.frames.push_back(std::move(*f));
    }
    return pkt;
}

uint8_t datagram_tag_for(const Packet& pkt) {
    uint8_t tag = 0;
    for (const Frame& f : pkt.frames) {
        if (std::holds_alternative<PingFrame>(f)) tag |= netem::tag_ping;
        if (std::holds_alternative<HandshakeDoneFrame>(f)) tag |= netem::tag_handshake_done;
        if (std::holds_alternative<PathChallengeFrame>(f)) tag |= netem::tag_path_challenge;
        if (std::holds_alternative<StreamFrame>(f)) tag |= netem::tag_stream;
    }
    return tag;
}

}  // namespace smaq::transport

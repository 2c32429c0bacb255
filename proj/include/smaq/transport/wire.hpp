#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smaq/bytes.hpp"
#include "smaq/crypto/aead.hpp"

namespace smaq::transport {

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kMaxPacketSize = 1200;
inline constexpr size_t kMaxCidLen = 20;

enum class Space : uint8_t { initial = 0, handshake = 1, application = 2 };
inline constexpr int kSpaceCount = 3;

// ---- varint (2-bit length prefix, 62-bit range) ----
void put_varint(ByteVec& out, uint64_t v);
size_t varint_size(uint64_t v);
std::optional<uint64_t> get_varint(ByteSpan in, size_t& off);

// ---- frames ----
enum class FrameType : uint8_t {
    padding = 0x00,
    ping = 0x01,
    ack = 0x02,
    crypto_stub = 0x06,
    stream = 0x08,
    path_challenge = 0x1a,
    path_response = 0x1b,
    connection_close = 0x1c,
    handshake_done = 0x1e,
};

struct PaddingFrame {
    uint32_t length = 0;
};
struct PingFrame {};
struct AckRange {
    uint64_t lo = 0;
    uint64_t hi = 0;  // inclusive
};
struct AckFrame {
    // Ranges in descending order; ranges.front().hi is the largest acked.
    std::vector<AckRange> ranges;
    uint64_t largest() const { return ranges.empty() ? 0 : ranges.front().hi; }
};
struct CryptoStubFrame {
    uint32_t quic_version = 0;
    uint16_t cipher_suite = 0;
    bool finished = false;  // client's handshake-completion flight
    ByteVec random;         // key-exchange transcript contribution
    ByteVec scid;           // sender's connection id
    ByteVec reset_token;    // stateless reset token for scid
    std::map<std::string, uint64_t> transport_params;
};
struct StreamFrame {
    uint64_t stream_id = 0;
    uint64_t offset = 0;
    bool fin = false;
    ByteVec data;
};
struct PathChallengeFrame {
    uint64_t token = 0;
};
struct PathResponseFrame {
    uint64_t token = 0;
};
struct ConnectionCloseFrame {
    uint64_t code = 0;
    std::string reason;
};
struct HandshakeDoneFrame {};

using Frame = std::variant<PaddingFrame, PingFrame, AckFrame, CryptoStubFrame, StreamFrame,
                           PathChallengeFrame, PathResponseFrame, ConnectionCloseFrame,
                           HandshakeDoneFrame>;

bool frame_is_ack_eliciting(const Frame& f);
void serialize_frame(const Frame& f, ByteVec& out);
std::optional<Frame> parse_frame(ByteSpan in, size_t& off);

// ---- packets ----
struct Packet {
    Space space = Space::application;
    ByteVec dcid;
    uint64_t packet_number = 0;
    std::vector<Frame> frames;
};

// Keys for one direction of application-space packet protection.
struct PacketProtection {
    crypto::Aead aead;
    ByteVec hp_mask;  // header-protection key bytes used as the pn XOR mask
};

// Serializes; application-space packets are sealed and header-protected,
// initial/handshake packets are carried in the clear (modeled handshake).
ByteVec serialize_packet(const Packet& pkt, const PacketProtection* prot);

struct ParsedHeader {
    Space space;
    ByteVec dcid;
    size_t pn_offset = 0;  // offset of the packet-number field
};

// Reads space and dcid without keys (the pn field may still be masked).
std::optional<ParsedHeader> peek_header(ByteSpan in);

std::optional<Packet> parse_packet(ByteSpan in, const PacketProtection* prot);

uint8_t datagram_tag_for(const Packet& pkt);

}  // namespace smaq::transport

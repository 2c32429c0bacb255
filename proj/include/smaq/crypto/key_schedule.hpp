#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "smaq/bytes.hpp"
#include "smaq/crypto/hkdf.hpp"

namespace smaq::crypto {

enum class Sender : uint8_t { client = 0, server = 1 };

inline const char* sender_name(Sender s) { return s == Sender::client ? "client" : "server"; }

inline constexpr uint64_t kMaxStreamId = (uint64_t{1} << 62) - 1;

// A 32-octet secret together with its derivation path. Secrets are only ever
// produced by derivation from a parent; there is no operation that recovers a
// parent from a child.
struct Secret {
    ByteVec bytes;
    std::string path;

    Secret() = default;
    Secret(ByteVec b, std::string p);

    bool operator==(const Secret& o) const { return bytes == o.bytes; }
};

// ---- Transport-level schedule (modeled handshake) ----

// Everything both endpoints derive once the handshake randoms are known.
struct TransportKeys {
    Secret client_traffic;  // <sender>_application_traffic_secret_0
    Secret server_traffic;
    Secret client_hp;  // header protection keys, fixed across key phases
    Secret server_hp;
    Secret exporter_master;
    uint64_t key_phase = 0;
};

// Derives the full transport schedule from the two handshake randoms.
TransportKeys derive_transport_keys(ByteSpan client_random, ByteSpan server_random);

// Packet-protection material for one direction.
struct PacketKeys {
    ByteVec key;  // 16
    ByteVec iv;   // 12
};

PacketKeys derive_packet_keys(const Secret& traffic_secret);

// ---- XADS schedule ----

Secret derive_xads_master(const Secret& exporter_master_secret);
Secret derive_stream_secret(const Secret& master, Sender sender, uint64_t stream_id);
Secret key_update(const Secret& current);

// Current per-stream, per-direction XADS secrets. The master never appears in
// any serialized connection state.
class XadsKeySchedule {
  public:
    XadsKeySchedule() = default;
    explicit XadsKeySchedule(Secret master) : master_(std::move(master)) {}

    static XadsKeySchedule from_exporter(const Secret& exporter_master) {
        return XadsKeySchedule(derive_xads_master(exporter_master));
    }

    const Secret& master() const { return master_; }

    // Phase-0 derivation on first use.
    const Secret& stream_secret(Sender sender, uint64_t stream_id);
    uint64_t phase(Sender sender, uint64_t stream_id) const;

    // Advances the given lane to the next key phase.
    void update(Sender sender, uint64_t stream_id);

  private:
    struct Lane {
        Secret secret;
        uint64_t phase = 0;
    };
    Secret master_;
    std::map<std::pair<uint8_t, uint64_t>, Lane> lanes_;
};

}  // namespace smaq::crypto

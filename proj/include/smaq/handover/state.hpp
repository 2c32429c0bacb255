#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "smaq/bytes.hpp"
#include "smaq/transport/connection.hpp"

namespace smaq::handover {

using netem::Address;

// The serialized unit of handover: the essential connection properties and
// the current-phase cryptographic material, explicitly excluding all XADS
// keying material.
struct SmaqState {
    struct CidEntry {
        uint8_t owner = 0;  // 0 = client, 1 = server
        ByteVec cid;
        uint64_t sequence = 0;
        bool operator==(const CidEntry&) const = default;
    };
    struct TokenEntry {
        ByteVec cid;
        ByteVec token;  // 16 octets
        bool operator==(const TokenEntry&) const = default;
    };

    std::vector<CidEntry> active_cids;
    std::vector<TokenEntry> stateless_reset_tokens;
    uint32_t quic_version = 0;
    uint16_t cipher_suite = 0;
    uint64_t key_phase = 0;
    ByteVec client_traffic_secret, server_traffic_secret;
    ByteVec client_hp_key, server_hp_key;
    Address client_addr, server_addr;
    std::map<std::string, uint64_t> client_params, server_params;
    uint64_t client_highest_sent = 0, client_highest_recv = 0;
    uint64_t server_highest_sent = 0, server_highest_recv = 0;

    bool operator==(const SmaqState&) const = default;

    ByteVec serialize() const;
    static std::optional<SmaqState> deserialize(ByteSpan in);
};

class StateNotReadyError : public std::logic_error {
  public:
    StateNotReadyError() : std::logic_error("connection keys not yet established") {}
};

// Builds the state object from a live client connection. Requires handshake
// keys; the connection remains fully usable afterwards.
SmaqState create_state(const transport::Connection& conn);

enum class SmaqErrorReason : uint8_t {
    version_unsupported = 1,
    cipher_unsupported = 2,
    transport_parameter_unsupported = 3,
};

const char* smaq_error_name(SmaqErrorReason r);

struct MboxSupport {
    std::set<uint32_t> quic_versions{1};
    std::set<uint16_t> cipher_suites{0x1301};
    // Parameter support defaults to the implementation's known set.
    std::function<bool(const std::string&)> param_supported;
};

// The restore-time compatibility check: version, cipher suite and every
// handed-over transport parameter must be supported.
std::optional<SmaqErrorReason> check_restorable(const SmaqState& state,
                                                const MboxSupport& support);

transport::RestoreInfo to_restore_info(const SmaqState& state);

// Transitive handover: the altered state differs from the original only in
// the client address field.
SmaqState alter_client_address(const SmaqState& state, const Address& new_client_addr);

}  // namespace smaq::handover

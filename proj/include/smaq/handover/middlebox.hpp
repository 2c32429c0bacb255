#pragma once

#include <memory>

#include "smaq/handover/state.hpp"

namespace smaq::handover {

using netem::Datagram;
using netem::Time;

struct MboxSessionConfig {
    Address client_facing_local;
    Address server_facing_local;
    congestion::Config cc_client_side;  // connection toward the client
    congestion::Config cc_server_side;  // connection toward the server
    bool ping_client = true;
    bool ping_server = true;
    Time ping_give_up = netem::seconds(3);
    Time idle_timeout = netem::seconds(10);
};

// A restored connection on a middlebox: two facades sharing the handed-over
// identity, spliced back to back. The client-facing side acts as the migrated
// server, the server-facing side as the migrated client. Stream payload is
// forwarded opaquely; a HANDSHAKE_DONE seen on the server side is re-sent to
// the client.
class MboxSession {
  public:
    MboxSession(transport::Env& env, const SmaqState& state, const MboxSessionConfig& cfg);
    ~MboxSession();

    void start();
    void start_server_side_pings();  // single-middlebox fallback

    transport::Connection& client_facing() { return *client_facing_; }
    transport::Connection& server_facing() { return *server_facing_; }

    void on_datagram(const Datagram& dg);
    bool owns_port(uint16_t port) const;

    bool failed() const { return failed_; }
    uint64_t splice_buffer_bytes() const;
    uint64_t forwarded_handshake_done() const { return forwarded_hd_; }

    // Secrecy-scan support: every octet string this session holds.
    void append_held_bytes(ByteVec& out) const;

    // Wipes the retained state copy.
    void erase_state();

  private:
    void wire_splice(transport::Connection& from, transport::Connection& to, bool from_server);

    transport::Env& env_;
    MboxSessionConfig cfg_;
    ByteVec state_copy_;  // retained serialized state, wiped on erase
    std::unique_ptr<transport::Connection> client_facing_;
    std::unique_ptr<transport::Connection> server_facing_;
    bool failed_ = false;
    uint64_t forwarded_hd_ = 0;
};

}  // namespace smaq::handover

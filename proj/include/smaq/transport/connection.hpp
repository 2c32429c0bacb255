#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "smaq/congestion/controller.hpp"
#include "smaq/crypto/key_schedule.hpp"
#include "smaq/netem/network.hpp"
#include "smaq/netem/rng.hpp"
#include "smaq/netem/scheduler.hpp"
#include "smaq/netem/trace.hpp"
#include "smaq/transport/wire.hpp"

namespace smaq::transport {

using netem::Address;
using netem::Datagram;
using netem::Time;

// Environment a connection runs in: simulated clock, datagram I/O, timers,
// randomness and the trace sink. Implemented by the simulation nodes.
class Env {
  public:
    virtual ~Env() = default;
    virtual Time now() const = 0;
    virtual void send_datagram(Datagram dg) = 0;
    virtual void schedule(Time at, std::function<void()> fn) = 0;
    virtual netem::Rng& rng() = 0;
    virtual netem::TraceLog& trace() = 0;
    virtual const std::string& node() const = 0;
};

enum class Role : uint8_t { client, server, mbox_client_facing, mbox_server_facing };

inline bool sends_as_server(Role r) {
    return r == Role::server || r == Role::mbox_client_facing;
}

enum class HandshakeState : uint8_t { idle, initial_sent, keys_established, confirmed };

enum class CloseReason : uint8_t {
    none,
    peer_close,
    idle_timeout,
    protocol_error,
    path_validation_failed,
    migration_failed,
    aborted,
};

struct TransportParams {
    std::map<std::string, uint64_t> map;

    bool smaq() const {
        auto it = map.find("smaq");
        return it != map.end() && it->second == 1;
    }
};

// The set of parameter names this implementation understands; restoring a
// state that names anything else is rejected.
bool transport_param_supported(const std::string& name);

struct ConnConfig {
    Role role = Role::client;
    Address local;
    Address peer;
    uint32_t quic_version = 1;
    uint16_t cipher_suite = 0x1301;
    TransportParams params;
    congestion::Config cc;
    Time idle_timeout = netem::seconds(10);
    // Server endpoints validate a new path before using it; clients and
    // middlebox facades adopt directly (reachability known out of band).
    bool validate_on_path_change = false;
    size_t stream_send_limit = 8 * 1024 * 1024;
    Time migration_ping_give_up = netem::seconds(3);
    std::string label;  // trace node label, defaults to env node name
};

struct Callbacks {
    std::function<void()> on_keys_established;
    std::function<void()> on_confirmed;
    std::function<void(uint64_t stream_id, ByteSpan data, bool fin)> on_stream_data;
    std::function<void()> on_migrated;
    std::function<void()> on_handshake_done_frame;
    std::function<void(CloseReason)> on_closed;
    std::function<void()> on_writable;
};

// Everything a middlebox needs to continue a connection; produced from a
// serialized state object by the handover layer.
struct RestoreInfo {
    uint32_t quic_version = 1;
    uint16_t cipher_suite = 0x1301;
    uint64_t key_phase = 0;
    crypto::Secret client_traffic, server_traffic, client_hp, server_hp;
    ByteVec client_cid, server_cid;
    uint64_t client_cid_seq = 0, server_cid_seq = 0;
    ByteVec client_reset_token, server_reset_token;
    TransportParams client_params, server_params;
    uint64_t client_highest_sent = 0, client_highest_recv = 0;
    uint64_t server_highest_sent = 0, server_highest_recv = 0;
    Address client_addr, server_addr;
};

class Connection {
  public:
    Connection(Env& env, ConnConfig cfg, Callbacks cb);

    // Client: sends the Initial packet.
    void connect();

    // Middlebox facade continuing a handed-over connection. Packet numbers
    // resume above the handed-over high-water marks.
    static std::unique_ptr<Connection> restore(Env& env, ConnConfig cfg, Callbacks cb,
                                               const RestoreInfo& info);

    void set_callbacks(Callbacks cb) { cb_ = std::move(cb); }

    void on_datagram(const Datagram& dg);

    // ---- streams (client-initiated bidirectional) ----
    uint64_t open_stream();
    void stream_write(uint64_t id, ByteSpan data, bool fin);
    size_t stream_send_budget(uint64_t id) const;
    bool stream_fully_acked(uint64_t id) const;

    // ---- SMAQ hooks ----
    void start_migration_pings();
    void stop_migration_pings();
    // Client-side handover hold: suppresses application sends and drops
    // stream data arriving from the original server path.
    void set_handover_hold(bool hold);
    // Facade-side: suppress stream sends until the first packet arrives from
    // the (possibly migrated) peer.
    void hold_sends_until_peer_activity();
    void set_ignore_path_change(bool v) { ignore_path_change_ = v; }
    void send_handshake_done();  // middlebox forwarding of the frame
    void close(CloseReason reason, uint64_t code = 0);
    // Dumps key material and buffered stream bytes; secrecy-scan input.
    void append_held_bytes(ByteVec& out) const;

    // ---- introspection ----
    HandshakeState handshake_state() const { return hs_; }
    bool confirmed() const { return hs_ == HandshakeState::confirmed; }
    bool keys_ready() const { return hs_ >= HandshakeState::keys_established; }
    bool closed() const { return close_reason_ != CloseReason::none; }
    CloseReason close_reason() const { return close_reason_; }
    const Address& active_path() const { return peer_; }
    const Address& local_address() const { return cfg_.local; }
    bool peer_supports(const std::string& param) const;
    const TransportParams& peer_params() const { return peer_params_; }
    const TransportParams& local_params() const { return cfg_.params; }
    uint32_t quic_version() const { return cfg_.quic_version; }
    uint16_t cipher_suite() const { return cfg_.cipher_suite; }
    uint64_t key_phase() const { return key_phase_; }

    // Endpoint-only XADS root; never present on restored facades.
    const crypto::Secret& exporter_master() const;
    bool has_exporter() const { return exporter_master_.has_value(); }

    // State-object source material (valid once keys are established).
    const crypto::Secret& client_traffic_secret() const { return keys_.client_traffic; }
    const crypto::Secret& server_traffic_secret() const { return keys_.server_traffic; }
    const crypto::Secret& client_hp_secret() const { return keys_.client_hp; }
    const crypto::Secret& server_hp_secret() const { return keys_.server_hp; }
    const ByteVec& client_cid() const;
    const ByteVec& server_cid() const;
    uint64_t client_cid_seq() const;
    uint64_t server_cid_seq() const;
    const ByteVec& client_reset_token() const;
    const ByteVec& server_reset_token() const;
    uint64_t highest_sent_pn(bool client_side) const;
    uint64_t highest_recv_pn(bool client_side) const;
    const ByteVec& local_cid() const { return local_cid_; }
    const ByteVec& initial_dcid() const { return initial_dcid_; }

    // counters
    uint64_t decrypt_failures() const { return decrypt_failures_; }
    uint64_t duplicate_packets() const { return duplicate_packets_; }
    uint64_t early_pings() const { return early_pings_; }
    const congestion::Controller& cc() const { return cc_; }
    uint64_t splice_buffer_bytes() const;  // occupancy of unsent stream data

    const std::string& label() const { return label_; }

    std::string debug_state() const;

  private:
    struct RetxItem {
        enum Kind : uint8_t { stream_range, handshake_done, crypto } kind = stream_range;
        uint64_t stream_id = 0;
        uint64_t off = 0;
        uint64_t len = 0;
        bool fin = false;
    };

    struct SentPacketInfo {
        uint32_t bytes = 0;
        Time sent = 0;
        bool ack_eliciting = false;
        bool in_cc = false;
        std::vector<RetxItem> retx;
    };

    struct RecvTracker {
        std::vector<AckRange> ranges;  // ascending, merged
        uint64_t floor = 0;            // pns at or below are treated as seen
        bool has_floor = false;
        bool ack_pending = false;
        int eliciting_since_ack = 0;
        bool note(uint64_t pn);  // false if duplicate
        uint64_t largest() const {
            return ranges.empty() ? (has_floor ? floor : 0) : ranges.back().hi;
        }
        std::vector<AckRange> to_ack_ranges() const;  // descending for the frame
    };

    struct SpaceState {
        uint64_t next_pn = 0;
        std::map<uint64_t, SentPacketInfo> inflight;
        RecvTracker recv;
        uint64_t largest_acked = UINT64_MAX;  // UINT64_MAX = none
        Time last_eliciting_sent = -1;
    };

    struct SendStream {
        ByteVec buf;
        size_t start = 0;      // buf[start] is offset `base`
        uint64_t base = 0;     // lowest unacked offset
        uint64_t next_off = 0;
        bool fin_queued = false;
        uint64_t final_off = 0;
        bool fin_sent = false;
        bool fin_acked = false;
        bool queued_for_send = false;
        std::vector<AckRange> acked;  // half-open [lo, hi) offset ranges
        std::deque<std::pair<uint64_t, uint64_t>> retx;  // [off, end)
        uint64_t buffered() const { return buf.size() - start; }
        uint64_t end_off() const { return base + buffered(); }
    };

    struct RecvStream {
        uint64_t delivered = 0;
        std::map<uint64_t, ByteVec> segments;
        std::optional<uint64_t> final_off;
        bool fin_delivered = false;
    };

    // setup
    void setup_endpoint_keys(ByteSpan client_random, ByteSpan server_random);
    void install_packet_protection();

    // receive path
    void handle_packet(const Packet& pkt, const Address& from, uint8_t tag);
    void handle_frame(const Frame& f, Space space, const Packet& pkt, const Address& from);
    void handle_ack(const AckFrame& ack, Space space);
    void handle_stream_frame(const StreamFrame& sf);
    void handle_crypto_stub(const CryptoStubFrame& cs, const Address& from);
    void maybe_adopt_path(const Packet& pkt, const Address& from, bool had_ping);

    // send path
    void maybe_send();
    bool send_one_control_packet();
    bool send_one_stream_packet();
    void send_packet(Space space, std::vector<Frame> frames, std::vector<RetxItem> retx,
                     bool ack_eliciting, bool in_cc, std::optional<Address> to = {});
    void attach_ack(Space space, std::vector<Frame>& frames);
    void queue_initial();
    void queue_server_handshake();
    void queue_finished();

    // recovery
    void detect_losses(Space space, Time now);
    void on_pto(Time now);
    void rearm_pto();
    void requeue(const RetxItem& item);

    // timers
    void arm();
    void service();
    Time next_deadline();
    void touch_idle();

    void mark_send_ready(uint64_t id, SendStream& ss);
    void deliver_recv_prefix(uint64_t id, RecvStream& rs);
    void stream_acked_range(uint64_t id, uint64_t off, uint64_t end, bool fin);
    void notify_writable();
    void become_confirmed();

    Env& env_;
    ConnConfig cfg_;
    Callbacks cb_;
    std::string label_;

    HandshakeState hs_ = HandshakeState::idle;
    CloseReason close_reason_ = CloseReason::none;
    bool close_frame_sent_ = false;

    Address peer_;
    Address original_peer_;
    std::optional<Address> pending_path_;
    uint64_t path_change_pn_ = 0;  // pn of the packet that last moved the path
    bool ignore_path_change_ = false;

    // identity
    ByteVec local_cid_, peer_cid_, initial_dcid_;
    uint64_t local_cid_seq_ = 0, peer_cid_seq_ = 0;
    ByteVec local_reset_token_, peer_reset_token_;
    TransportParams peer_params_;
    ByteVec client_random_, server_random_;
    uint64_t key_phase_ = 0;

    crypto::TransportKeys keys_;
    std::optional<crypto::Secret> exporter_master_;
    std::optional<PacketProtection> tx_prot_, rx_prot_;

    SpaceState spaces_[kSpaceCount];
    std::map<uint64_t, SendStream> send_streams_;
    std::map<uint64_t, RecvStream> recv_streams_;
    uint64_t next_stream_id_ = 0;
    std::deque<uint64_t> send_ready_;  // streams with data/fin to send

    congestion::Controller cc_;

    // pending control work
    bool hd_pending_ = false;        // HANDSHAKE_DONE owed to the peer
    bool initial_pending_ = false;   // client crypto flight
    bool hs_flight_pending_ = false;  // server crypto flight
    bool finished_pending_ = false;  // client handshake completion flight
    std::optional<uint64_t> challenge_token_;
    int challenge_sends_ = 0;
    std::optional<std::pair<uint64_t, Address>> response_pending_;

    // migration pinging
    bool pinging_ = false;
    Time ping_started_ = 0;
    Time ping_at_ = netem::kNever;
    bool peer_seen_since_ping_ = false;

    // handover holds
    bool suppress_sends_ = false;
    bool drop_original_path_streams_ = false;
    bool release_hold_on_peer_activity_ = false;

    // timers
    Time pto_at_ = netem::kNever;
    Time ack_at_ = netem::kNever;
    Time idle_at_ = netem::kNever;
    Time path_retx_at_ = netem::kNever;
    Time pacing_at_ = netem::kNever;
    Time armed_at_ = netem::kNever;
    uint64_t alarm_epoch_ = 0;

    // amplification guard (server, pre-address-validation)
    bool peer_address_validated_ = false;
    uint64_t bytes_received_pre_validation_ = 0;
    uint64_t bytes_sent_pre_validation_ = 0;

    bool first_app_send_traced_ = false;

    uint64_t decrypt_failures_ = 0;
    uint64_t duplicate_packets_ = 0;
    uint64_t early_pings_ = 0;

  public:
    // send-composition counters (diagnostics)
    uint64_t dbg_stream_pkts = 0, dbg_stream_payload = 0, dbg_wire_bytes = 0,
             dbg_acks_attached = 0, dbg_ack_ranges = 0;
};

}  // namespace smaq::transport

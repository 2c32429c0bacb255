#pragma once

// Internal node wiring for scenario runs; the public surface is sim.hpp.

#include <map>

#include "smaq/sim/sim.hpp"

namespace smaq::sim {

inline constexpr uint16_t kServerBasePort = 443;
inline constexpr uint16_t kClientBasePort = 40000;
inline constexpr uint16_t kOobClientPep1Port = 900;
inline constexpr uint16_t kOobPep1Pep2Port = 901;

class NodeEnv : public transport::Env {
  public:
    NodeEnv(netem::Network& net, netem::NodeId id, uint64_t seed)
        : net_(net), id_(id), rng_(seed), name_(netem::node_name(id)) {}

    Time now() const override { return net_.scheduler().now(); }
    void send_datagram(Datagram dg) override {
        if (tap) tap(dg);
        net_.send(std::move(dg));
    }
    void schedule(Time at, std::function<void()> fn) override {
        net_.scheduler().at(at, std::move(fn));
    }
    netem::Rng& rng() override { return rng_; }
    netem::TraceLog& trace() override { return net_.trace(); }
    const std::string& node() const override { return name_; }

    std::function<void(const Datagram&)> tap;  // secrecy-scan hook

  private:
    netem::Network& net_;
    netem::NodeId id_;
    netem::Rng rng_;
    std::string name_;
};

// Deterministic response payload; both server (generation) and client
// (verification) derive the same stream.
inline netem::Rng payload_rng(uint64_t seed, uint16_t server_port, uint64_t stream_id) {
    return netem::Rng(netem::Rng::derive(
        seed, "payload/" + std::to_string(server_port) + "/" + std::to_string(stream_id)));
}

class ServerNode {
  public:
    ServerNode(netem::Network& net, const RunConfig& cfg);
    ~ServerNode();
    void on_datagram(const Datagram& dg);
    NodeEnv& env() { return env_; }

  private:
    struct ServerConn;
    void accept(const Datagram& dg);
    void on_request(ServerConn& sc, uint64_t stream_id, ByteSpan data, bool fin);
    void pump_responses(ServerConn& sc);

    netem::Network& net_;
    const RunConfig& cfg_;
    NodeEnv env_;
    std::vector<std::unique_ptr<ServerConn>> conns_;
    std::map<ByteVec, ServerConn*> by_cid_;
};

class PepNode {
  public:
    PepNode(netem::Network& net, const RunConfig& cfg, int index /* 1 or 2 */);
    void on_datagram(const Datagram& dg);
    uint64_t splice_buffer_bytes() const;
    void append_held_bytes(ByteVec& out) const;
    uint64_t forwarded_handshake_done() const;
    void debug_dump() const;
    NodeEnv& env() { return env_; }

  private:
    struct Session {
        std::unique_ptr<handover::MboxSession> mbox;
        bool transitive_ok = false;
        bool transitive_done = false;  // true once pep2 accepted or we fell back
    };
    void on_oob_client_side(ByteVec msg);  // pep1: from client; pep2: from pep1
    void on_oob_pep2_side(ByteVec msg);    // pep1 only: replies from pep2
    void handle_offer(uint32_t session_id, ByteSpan payload);
    handover::MboxSessionConfig session_config(uint32_t session_id) const;

    netem::Network& net_;
    const RunConfig& cfg_;
    int index_;
    NodeEnv env_;
    handover::MboxSupport support_;
    std::unique_ptr<handover::OobEndpoint> oob_up_;    // toward the client side
    std::unique_ptr<handover::OobEndpoint> oob_down_;  // pep1 -> pep2
    std::map<uint32_t, Session> sessions_;
    std::map<uint16_t, uint32_t> port_to_session_;
};

class ClientNode {
  public:
    ClientNode(netem::Network& net, const RunConfig& cfg, RunResult& result);
    void start();
    void on_datagram(const Datagram& dg);
    bool all_complete() const;
    uint64_t total_received() const;
    void finalize(RunResult& result);
    NodeEnv& env() { return env_; }

  private:
    struct Resource {
        uint64_t stream_id = 0;
        uint64_t expect = 0;
        uint64_t got = 0;
        bool fin_seen = false;
        std::optional<netem::Rng> verify_rng;
        bool done() const { return fin_seen && got >= expect; }
    };
    struct ClientConn {
        std::unique_ptr<transport::Connection> conn;
        uint16_t server_port = 0;
        std::optional<crypto::XadsKeySchedule> xads;
        std::map<uint64_t, crypto::XadsSealer> tx;
        std::map<uint64_t, crypto::XadsOpener> rx;
        std::vector<Resource> resources;
        bool unbounded = false;
        bool handover_active = false;
        bool ok_received = false;
        bool migrated = false;
        bool abandoned = false;
        bool complete = false;
    };

    void on_keys_established(size_t idx);
    void begin_handover(size_t idx);
    void send_requests(size_t idx);
    void on_stream_data(size_t idx, uint64_t stream_id, ByteSpan data, bool fin);
    void on_oob_message(ByteVec msg);
    void fallback(size_t idx);
    void check_complete(size_t idx);

    netem::Network& net_;
    const RunConfig& cfg_;
    RunResult& result_;
    NodeEnv env_;
    std::unique_ptr<handover::OobEndpoint> oob_;
    std::vector<std::unique_ptr<ClientConn>> conns_;
};

}  // namespace smaq::sim

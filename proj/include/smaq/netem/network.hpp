#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>

#include "smaq/bytes.hpp"
#include "smaq/netem/rng.hpp"
#include "smaq/netem/scheduler.hpp"
#include "smaq/netem/trace.hpp"

namespace smaq::netem {

using NodeId = uint8_t;

inline constexpr NodeId kClient = 0;
inline constexpr NodeId kPep1 = 1;
inline constexpr NodeId kPep2 = 2;
inline constexpr NodeId kServer = 3;
inline constexpr int kNodeCount = 4;

const char* node_name(NodeId n);

struct Address {
    NodeId node = 0;
    uint16_t port = 0;
    bool operator==(const Address&) const = default;
};

// Harness metadata riding next to the wire bytes; used only by fault filters
// and the packet log, never by the protocol.
enum DatagramTag : uint8_t {
    tag_ping = 0x01,
    tag_handshake_done = 0x02,
    tag_oob = 0x04,
    tag_path_challenge = 0x08,
    tag_stream = 0x10,
};

struct Datagram {
    Address src;
    Address dst;
    ByteVec bytes;
    uint8_t tag = 0;
};

struct LinkProfile {
    Time one_way_delay = 0;
    double loss_probability = 0.0;
    uint64_t rate_bps = 0;  // 0 = unlimited
};

// Directed point-to-point link: i.i.d. random loss, serialization delay at
// the configured rate, constant propagation delay, FIFO ordering.
class Link {
  public:
    Link(EventScheduler& sched, uint64_t loss_seed, LinkProfile profile, std::string name);

    void transmit(Datagram dg, const std::function<void(Datagram)>& deliver);

    // Test instrumentation: returns true to drop the datagram.
    void set_fault_filter(std::function<bool(const Datagram&)> f) { fault_ = std::move(f); }

    const LinkProfile& profile() const { return profile_; }
    const std::string& name() const { return name_; }
    uint64_t sent() const { return sent_; }
    uint64_t dropped() const { return dropped_; }
    uint64_t bytes_carried() const { return bytes_carried_; }
    Time busy_time() const { return busy_time_; }

  private:
    EventScheduler& sched_;
    Rng loss_rng_;
    LinkProfile profile_;
    std::string name_;
    std::function<bool(const Datagram&)> fault_;
    Time busy_until_ = 0;
    uint64_t sent_ = 0;
    uint64_t dropped_ = 0;
    uint64_t bytes_carried_ = 0;
    Time busy_time_ = 0;
};

enum class Orbit { geo, leo };

struct TopologyConfig {
    Orbit orbit = Orbit::geo;
    double loss = 0.0;  // applied to the satellite segment, both directions
    // One-way delays per segment.
    Time client_pep1_delay = microseconds(400);
    Time satellite_delay = milliseconds(250);
    Time pep2_server_delay = milliseconds(40);
    // Rate limit on every link in the server-to-client direction.
    uint64_t downlink_rate_bps = 20'000'000;

    static TopologyConfig make(Orbit orbit, double loss);

    Time end_to_end_owd() const {
        return client_pep1_delay + satellite_delay + pep2_server_delay;
    }
    Time end_to_end_rtt() const { return 2 * end_to_end_owd(); }
    Time segment_rtt(NodeId a, NodeId b) const;
};

// The client--pep1--pep2--server chain. Datagrams are routed hop by hop;
// intermediate nodes forward anything not addressed to them.
class Network {
  public:
    Network(EventScheduler& sched, TraceLog& trace, uint64_t seed, const TopologyConfig& cfg);

    using Handler = std::function<void(const Datagram&)>;
    void attach(NodeId node, Handler h) { handlers_[node] = std::move(h); }

    void send(Datagram dg);

    Link& link(NodeId from, NodeId to);
    const TopologyConfig& config() const { return cfg_; }
    EventScheduler& scheduler() { return sched_; }
    TraceLog& trace() { return trace_; }

    uint64_t unknown_dst_drops() const { return unknown_dst_drops_; }

  private:
    void deliver_local(const Datagram& dg);
    void route(Datagram dg);

    EventScheduler& sched_;
    TraceLog& trace_;
    TopologyConfig cfg_;
    std::array<Handler, kNodeCount> handlers_;
    // links_[i][0]: i -> i+1 (toward server), links_[i][1]: i+1 -> i
    std::array<std::array<std::unique_ptr<Link>, 2>, kNodeCount - 1> links_;
    uint64_t unknown_dst_drops_ = 0;
};

}  // namespace smaq::netem

#include "smaq/netem/network.hpp"

#include <stdexcept>

namespace smaq::netem {

const char* node_name(NodeId n) {
    switch (n) {
        case kClient: return "client";
        case kPep1: return "pep1";
        case kPep2: return "pep2";
        case kServer: return "server";
    }
    return "?";
}

Link::Link(EventScheduler& sched, uint64_t loss_seed, LinkProfile profile, std::string name)
    : sched_(sched), loss_rng_(loss_seed), profile_(profile), name_(std::move(name)) {}

void Link::transmit(Datagram dg, const std::function<void(Datagram)>& deliver) {
    ++sent_;
    if (fault_ && fault_(dg)) {
        ++dropped_;
        return;
    }
    if (loss_rng_.chance(profile_.loss_probability)) {
        ++dropped_;
        return;
    }
    Time serialization = 0;
    if (profile_.rate_bps > 0) {
        serialization = Time((dg.bytes.size() * 8ull * 1'000'000'000ull) / profile_.rate_bps);
    }
    bytes_carried_ += dg.bytes.size();
    busy_time_ += serialization;
    Time start = std::max(sched_.now(), busy_until_);
    busy_until_ = start + serialization;
    Time arrival = busy_until_ + profile_.one_way_delay;
    sched_.at(arrival, [deliver, dg = std::move(dg)]() mutable { deliver(std::move(dg)); });
}

TopologyConfig TopologyConfig::make(Orbit orbit, double loss) {
    TopologyConfig cfg;
    cfg.orbit = orbit;
    cfg.loss = loss;
    cfg.satellite_delay = orbit == Orbit::geo ? milliseconds(250) : milliseconds(16);
    return cfg;
}

Time TopologyConfig::segment_rtt(NodeId a, NodeId b) const {
    if (a > b) std::swap(a, b);
    Time owd = 0;
    for (NodeId n = a; n < b; ++n) {
        if (n == 0) owd += client_pep1_delay;
        if (n == 1) owd += satellite_delay;
        if (n == 2) owd += pep2_server_delay;
    }
    return 2 * owd;
}

Network::Network(EventScheduler& sched, TraceLog& trace, uint64_t seed,
                 const TopologyConfig& cfg)
    : sched_(sched), trace_(trace), cfg_(cfg) {
    auto profile_for = [&](NodeId low, bool toward_server) {
        LinkProfile p;
        p.one_way_delay = low == 0   ? cfg.client_pep1_delay
                          : low == 1 ? cfg.satellite_delay
                                     : cfg.pep2_server_delay;
        p.loss_probability = (low == 1) ? cfg.loss : 0.0;
        p.rate_bps = toward_server ? 0 : cfg.downlink_rate_bps;
        return p;
    };
    for (NodeId low = 0; low < kNodeCount - 1; ++low) {
        std::string fwd = std::string(node_name(low)) + "->" + node_name(low + 1);
        std::string rev = std::string(node_name(low + 1)) + "->" + node_name(low);
        links_[low][0] = std::make_unique<Link>(sched, Rng::derive(seed, "loss/" + fwd),
                                                profile_for(low, true), fwd);
        links_[low][1] = std::make_unique<Link>(sched, Rng::derive(seed, "loss/" + rev),
                                                profile_for(low, false), rev);
    }
}

Link& Network::link(NodeId from, NodeId to) {
    if (from == to || from >= kNodeCount || to >= kNodeCount ||
        (from > to ? from - to : to - from) != 1)
        throw std::invalid_argument("network: not an adjacent pair");
    NodeId low = std::min(from, to);
    return *links_[low][from < to ? 0 : 1];
}

void Network::send(Datagram dg) {
    if (trace_.packet_log_enabled()) {
        trace_.packet_log(sched_.now(), node_name(dg.src.node), "send",
                          std::to_string(dg.bytes.size()) + "B to " +
                              node_name(dg.dst.node) + ":" + std::to_string(dg.dst.port));
    }
    route(std::move(dg));
}

void Network::route(Datagram dg) {
    NodeId at = dg.src.node;
    // Walk the chain one link at a time; each hop applies its own profile.
    struct Hop {
        Network* net;
        NodeId at;
        void operator()(Datagram d) const {
            if (d.dst.node == at) {
                net->deliver_local(d);
                return;
            }
            NodeId next = d.dst.node > at ? NodeId(at + 1) : NodeId(at - 1);
            Datagram copy = std::move(d);
            NodeId from = at;
            net->link(from, next).transmit(std::move(copy), Hop{net, next});
        }
    };
    Hop{this, at}(std::move(dg));
}

void Network::deliver_local(const Datagram& dg) {
    if (trace_.packet_log_enabled()) {
        trace_.packet_log(sched_.now(), node_name(dg.dst.node), "recv",
                          std::to_string(dg.bytes.size()) + "B from " +
                              node_name(dg.src.node) + ":" + std::to_string(dg.src.port));
    }
    auto& h = handlers_[dg.dst.node];
    if (h) {
        h(dg);
    } else {
        ++unknown_dst_drops_;
    }
}

}  // namespace smaq::netem

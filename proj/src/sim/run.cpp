#include "endpoints.hpp"

namespace smaq::sim {

using netem::EventKind;

namespace {

void install_faults(netem::Network& net, const RunConfig& cfg) {
    switch (cfg.fault) {
        case Fault::mbox_unreachable: {
            auto drop_oob = [](const Datagram& dg) { return (dg.tag & netem::tag_oob) != 0; };
            net.link(netem::kClient, netem::kPep1).set_fault_filter(drop_oob);
            net.link(netem::kPep1, netem::kClient).set_fault_filter(drop_oob);
            break;
        }
        case Fault::drop_first_handshake_done: {
            auto counter = std::make_shared<int>(0);
            net.link(netem::kServer, netem::kPep2).set_fault_filter(
                [counter](const Datagram& dg) {
                    if ((dg.tag & netem::tag_handshake_done) == 0) return false;
                    return (*counter)++ == 0;
                });
            break;
        }
        case Fault::ping_blackhole_client: {
            net.link(netem::kPep1, netem::kClient).set_fault_filter([](const Datagram& dg) {
                return (dg.tag & netem::tag_ping) != 0 && dg.src.node == netem::kPep1 &&
                       dg.src.port >= 20000;
            });
            break;
        }
        default:
            break;
    }
}

Outcome classify(const RunConfig& cfg, const RunResult& r) {
    Time closed = r.trace.first(EventKind::connection_closed, "client");
    Time idle = r.trace.first(EventKind::idle_timeout, "client");
    bool migrated = r.trace.has(EventKind::migration_ping, "client");
    if (closed >= 0) return Outcome::closed_error;
    if (idle >= 0 && !r.transfer_complete) return Outcome::timed_out;
    if (cfg.mode == Mode::smaq_pep && migrated && !r.fallback_plain)
        return Outcome::completed_smaq;
    return Outcome::completed_plain;
}

}  // namespace

RunResult run_scenario(const RunConfig& cfg) {
    RunResult result;
    netem::EventScheduler sched;
    netem::TraceLog trace;
    netem::Network net(sched, trace, cfg.seed, cfg.topo);
    install_faults(net, cfg);

    ClientNode client(net, cfg, result);
    ServerNode server(net, cfg);
    std::unique_ptr<PepNode> pep1, pep2;
    if (cfg.mode == Mode::smaq_pep && cfg.pep_count >= 1)
        pep1 = std::make_unique<PepNode>(net, cfg, 1);
    if (cfg.mode == Mode::smaq_pep && cfg.pep_count >= 2)
        pep2 = std::make_unique<PepNode>(net, cfg, 2);

    net.attach(netem::kClient, [&](const Datagram& dg) { client.on_datagram(dg); });
    net.attach(netem::kServer, [&](const Datagram& dg) { server.on_datagram(dg); });
    if (pep1) net.attach(netem::kPep1, [&](const Datagram& dg) { pep1->on_datagram(dg); });
    if (pep2) net.attach(netem::kPep2, [&](const Datagram& dg) { pep2->on_datagram(dg); });

    if (cfg.secrecy_scan) {
        auto tap = [&result](const Datagram& dg) {
            append(result.mbox_bytes, dg.bytes);
        };
        if (pep1) pep1->env().tap = tap;
        if (pep2) pep2->env().tap = tap;
    }

    // Byte-curve sampling and splice occupancy tracking.
    if (cfg.curve_interval > 0) {
        uint64_t ticks = uint64_t(cfg.run_until / cfg.curve_interval);
        result.curve.reserve(ticks + 1);
        auto sample = std::make_shared<std::function<void()>>();
        *sample = [&result, &client, &sched, &cfg, p1 = pep1.get(), p2 = pep2.get(),
                   sample]() {
            result.curve.push_back(client.total_received());
            uint64_t occupancy = 0;
            if (p1) occupancy += p1->splice_buffer_bytes();
            if (p2) occupancy += p2->splice_buffer_bytes();
            result.splice_peak = std::max(result.splice_peak, occupancy);
            if (sched.now() + cfg.curve_interval <= cfg.run_until)
                sched.after(cfg.curve_interval, *sample);
        };
        sched.after(cfg.curve_interval, *sample);
    }

    client.start();
    sched.run(cfg.run_until);

    client.finalize(result);
    if (cfg.secrecy_scan) {
        if (pep1) pep1->append_held_bytes(result.mbox_bytes);
        if (pep2) pep2->append_held_bytes(result.mbox_bytes);
    }
    if (pep1) result.forwarded_handshake_done += pep1->forwarded_handshake_done();
    if (pep2) result.forwarded_handshake_done += pep2->forwarded_handshake_done();

    result.trace = std::move(trace);
    result.keys_time = result.trace.first(EventKind::handshake_keys_ready, "client");
    result.confirmed_time = result.trace.first(EventKind::handshake_confirmed, "client");
    result.first_app_send = result.trace.first(EventKind::first_app_send, "client");
    Time created = result.trace.first(EventKind::state_created, "client");
    Time ping = result.trace.first(EventKind::migration_ping, "client");
    if (created >= 0 && ping >= 0) result.migration_time = ping - created;
    result.outcome = classify(cfg, result);
    return result;
}

}  // namespace smaq::sim

#include <doctest.h>

#include "smaq/netem/network.hpp"
#include "smaq/netem/scheduler.hpp"
#include "smaq/transport/connection.hpp"

using namespace smaq;
using namespace smaq::transport;

namespace {

// Two endpoints wired through the chain topology; peps act as forwarders.
struct Harness {
    netem::EventScheduler sched;
    netem::TraceLog trace;
    netem::Network net;

    struct HarnessEnv : Env {
        Harness* h;
        netem::Rng rng_;
        std::string name_;
        HarnessEnv(Harness* h, uint64_t seed, std::string name)
            : h(h), rng_(seed), name_(std::move(name)) {}
        netem::Time now() const override { return h->sched.now(); }
        void send_datagram(netem::Datagram dg) override { h->net.send(std::move(dg)); }
        void schedule(netem::Time at, std::function<void()> fn) override {
            h->sched.at(at, std::move(fn));
        }
        netem::Rng& rng() override { return rng_; }
        netem::TraceLog& trace() override { return h->trace; }
        const std::string& node() const override { return name_; }
    };

    HarnessEnv client_env{this, 11, "client"};
    HarnessEnv server_env{this, 22, "server"};
    std::unique_ptr<Connection> client, server;
    ByteVec server_rx, client_rx;
    bool server_rx_fin = false;

    explicit Harness(netem::TopologyConfig topo = netem::TopologyConfig::make(
                         netem::Orbit::leo, 0.0),
                     bool client_smaq = true, bool server_smaq = true)
        : net(sched, trace, 42, topo) {
        ConnConfig cc;
        cc.role = Role::client;
        cc.local = {netem::kClient, 4000};
        cc.peer = {netem::kServer, 443};
        if (client_smaq) cc.params.map["smaq"] = 1;
        cc.params.map["max_ack_delay_ms"] = 1;
        cc.cc.bottleneck_rate_bps = topo.downlink_rate_bps;
        Callbacks ccb;
        ccb.on_stream_data = [this](uint64_t, ByteSpan d, bool) { append(client_rx, d); };
        client = std::make_unique<Connection>(client_env, std::move(cc), std::move(ccb));

        net.attach(netem::kClient,
                   [this](const netem::Datagram& dg) { client->on_datagram(dg); });
        net.attach(netem::kServer, [this, server_smaq, topo](const netem::Datagram& dg) {
            if (!server) {
                ConnConfig sc;
                sc.role = Role::server;
                sc.local = {netem::kServer, 443};
                if (server_smaq) sc.params.map["smaq"] = 1;
                sc.params.map["max_ack_delay_ms"] = 1;
                sc.cc.bottleneck_rate_bps = topo.downlink_rate_bps;
                sc.validate_on_path_change = true;
                Callbacks scb;
                scb.on_stream_data = [this](uint64_t, ByteSpan d, bool fin) {
                    append(server_rx, d);
                    if (fin) server_rx_fin = true;
                };
                server =
                    std::make_unique<Connection>(server_env, std::move(sc), std::move(scb));
            }
            server->on_datagram(dg);
        });
    }

    void run_for(netem::Time t) { sched.run(sched.now() + t); }
};

}  // namespace

TEST_CASE("handshake completes with the expected timing") {
    Harness h;
    netem::Time rtt = h.net.config().end_to_end_rtt();
    h.client->connect();
    h.run_for(rtt * 3);
    REQUIRE(h.client->keys_ready());
    REQUIRE(h.client->confirmed());
    REQUIRE(h.server->confirmed());
    // Keys at ~1 RTT, confirmation at ~2 RTT.
    netem::Time keys = h.trace.first(netem::EventKind::handshake_keys_ready, "client");
    netem::Time conf = h.trace.first(netem::EventKind::handshake_confirmed, "client");
    CHECK(keys >= rtt);
    CHECK(keys <= rtt + netem::milliseconds(2));
    CHECK(conf >= 2 * rtt);
    CHECK(conf <= 2 * rtt + netem::milliseconds(3));
    // Both endpoints noted smaq support.
    CHECK(h.client->peer_supports("smaq"));
    CHECK(h.server->peer_supports("smaq"));
    // Secrets agree.
    CHECK(h.client->client_traffic_secret().bytes == h.server->client_traffic_secret().bytes);
    CHECK(h.client->exporter_master().bytes == h.server->exporter_master().bytes);
}

TEST_CASE("smaq parameter absent on one side yields a plain connection") {
    Harness h(netem::TopologyConfig::make(netem::Orbit::leo, 0.0), true, false);
    h.client->connect();
    h.run_for(netem::seconds(1));
    CHECK(h.client->confirmed());
    CHECK_FALSE(h.client->peer_supports("smaq"));
}

TEST_CASE("stream transfer is reliable over a lossy path") {
    auto topo = netem::TopologyConfig::make(netem::Orbit::leo, 0.001);
    Harness h(topo);
    h.client->connect();
    h.run_for(netem::seconds(1));
    REQUIRE(h.client->confirmed());

    netem::Rng payload(7);
    ByteVec sent;
    uint64_t stream = h.client->open_stream();
    for (int i = 0; i < 40; ++i) {
        ByteVec chunk = payload.bytes(50000);
        append(sent, chunk);
        h.client->stream_write(stream, chunk, i == 39);
    }
    h.run_for(netem::seconds(30));
    CHECK(h.server_rx_fin);
    REQUIRE(h.server_rx.size() == sent.size());
    CHECK(h.server_rx == sent);
}

TEST_CASE("interleaved streams preserve per-stream ordering") {
    Harness h;
    h.client->connect();
    h.run_for(netem::seconds(1));
    REQUIRE(h.client->confirmed());
    std::map<uint64_t, ByteVec> sent, got;
    h.server->set_callbacks([&] {
        Callbacks cb;
        cb.on_stream_data = [&](uint64_t id, ByteSpan d, bool) { append(got[id], d); };
        return cb;
    }());
    uint64_t s0 = h.client->open_stream();
    uint64_t s4 = h.client->open_stream();
    netem::Rng payload(3);
    for (int i = 0; i < 20; ++i) {
        ByteVec a = payload.bytes(3000), b = payload.bytes(2000);
        append(sent[s0], a);
        append(sent[s4], b);
        h.client->stream_write(s0, a, false);
        h.client->stream_write(s4, b, false);
    }
    h.run_for(netem::seconds(5));
    CHECK(got[s0] == sent[s0]);
    CHECK(got[s4] == sent[s4]);
}

TEST_CASE("write after fin is rejected") {
    Harness h;
    h.client->connect();
    h.run_for(netem::seconds(1));
    uint64_t stream = h.client->open_stream();
    h.client->stream_write(stream, ByteVec{1, 2, 3}, true);
    CHECK_THROWS_AS(h.client->stream_write(stream, ByteVec{4}, false), std::logic_error);
}

TEST_CASE("sustained download approaches the link rate") {
    auto topo = netem::TopologyConfig::make(netem::Orbit::leo, 0.0);
    Harness h(topo);
    h.client->connect();
    h.run_for(netem::seconds(1));
    REQUIRE(h.server->confirmed());

    uint64_t stream = h.server->open_stream();
    netem::Rng payload(9);
    auto pump = std::make_shared<std::function<void()>>();
    *pump = [&h, &payload, stream, pump] {
        while (h.server->stream_send_budget(stream) > 2 * 1024 * 1024) {
            h.server->stream_write(stream, payload.bytes(65536), false);
        }
        h.sched.after(netem::milliseconds(20), *pump);
    };
    (*pump)();
    netem::Time start = h.sched.now();
    size_t start_bytes = h.client_rx.size();
    h.run_for(netem::seconds(10));
    double elapsed = netem::to_seconds(h.sched.now() - start);
    double rate_bps = double(h.client_rx.size() - start_bytes) * 8 / elapsed;
    // Within 10% of the configured 20 Mbps, allowing for ramp-up.
    CHECK(rate_bps > 0.8 * 20e6);
    CHECK(rate_bps < 1.05 * 20e6);
}

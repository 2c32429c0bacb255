#include <doctest.h>

#include "smaq/netem/network.hpp"
#include "smaq/netem/scheduler.hpp"

using namespace smaq;
using namespace smaq::netem;

TEST_CASE("scheduler fires events in time order with stable ties") {
    EventScheduler sched;
    std::vector<int> order;
    sched.at(milliseconds(5), [&] { order.push_back(2); });
    sched.at(milliseconds(1), [&] { order.push_back(1); });
    sched.at(milliseconds(5), [&] { order.push_back(3); });  // tie: insertion order
    sched.at(milliseconds(9), [&] { order.push_back(4); });
    sched.run();
    CHECK(order == std::vector<int>{1, 2, 3, 4});
    CHECK(sched.now() == milliseconds(9));
}

TEST_CASE("link delivers after serialization plus propagation, in order") {
    EventScheduler sched;
    LinkProfile p;
    p.one_way_delay = milliseconds(250);
    p.rate_bps = 20'000'000;
    Link link(sched, 1, p, "t");
    std::vector<std::pair<Time, size_t>> arrivals;
    auto deliver = [&](Datagram dg) { arrivals.emplace_back(sched.now(), dg.bytes.size()); };
    Datagram dg;
    dg.bytes = ByteVec(1200, 0);
    link.transmit(dg, deliver);
    link.transmit(dg, deliver);
    sched.run();
    REQUIRE(arrivals.size() == 2);
    // 1200 B at 20 Mbps = 480 us serialization.
    CHECK(arrivals[0].first == milliseconds(250) + microseconds(480));
    CHECK(arrivals[1].first == milliseconds(250) + 2 * microseconds(480));
}

TEST_CASE("empirical loss rate approaches the configured probability") {
    EventScheduler sched;
    LinkProfile p;
    p.loss_probability = 0.001;
    Link link(sched, 77, p, "t");
    int delivered = 0;
    Datagram dg;
    dg.bytes = ByteVec(100, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) link.transmit(dg, [&](Datagram) { ++delivered; });
    sched.run();
    double observed = double(n - delivered) / n;
    CHECK(observed > 0.00085);  // +-15 %
    CHECK(observed < 0.00115);
    CHECK(uint64_t(delivered) + link.dropped() == link.sent());
}

TEST_CASE("saturated link caps goodput at the configured rate") {
    EventScheduler sched;
    LinkProfile p;
    p.one_way_delay = milliseconds(1);
    p.rate_bps = 20'000'000;
    Link link(sched, 1, p, "t");
    uint64_t delivered_bytes = 0;
    Datagram dg;
    dg.bytes = ByteVec(1200, 0);
    for (int i = 0; i < 30000; ++i) link.transmit(dg, [&](Datagram d) {
        delivered_bytes += d.bytes.size();
    });
    sched.run(seconds(10));
    double rate = double(delivered_bytes) * 8 / 10.0;
    CHECK(rate < 20e6 * 1.01);
    CHECK(rate > 20e6 * 0.95);
}

TEST_CASE("topology delays produce the published round-trip times") {
    // GEO: 2 x (0.4 + 250 + 40) = 580.8 ms; LEO: 2 x (0.4 + 16 + 40) = 112.8 ms.
    TopologyConfig geo = TopologyConfig::make(Orbit::geo, 0.0);
    CHECK(geo.end_to_end_rtt() == microseconds(580800));
    CHECK(geo.end_to_end_rtt() >= milliseconds(579));
    CHECK(geo.end_to_end_rtt() <= milliseconds(581));
    TopologyConfig leo = TopologyConfig::make(Orbit::leo, 0.0);
    CHECK(leo.end_to_end_rtt() == microseconds(112800));
    CHECK(leo.segment_rtt(kPep1, kPep2) == milliseconds(32));
    CHECK(geo.segment_rtt(kClient, kPep1) == microseconds(800));

    // A full datagram round trip through the chain matches the configured RTT
    // up to serialization of the small packets involved.
    EventScheduler sched;
    TraceLog trace;
    Network net(sched, trace, 3, geo);
    Time got = -1;
    net.attach(kServer, [&](const Datagram& dg) {
        Datagram pong;
        pong.src = dg.dst;
        pong.dst = dg.src;
        pong.bytes = ByteVec(40, 1);
        net.send(std::move(pong));
    });
    net.attach(kClient, [&](const Datagram&) { got = sched.now(); });
    Datagram ping;
    ping.src = {kClient, 1};
    ping.dst = {kServer, 2};
    ping.bytes = ByteVec(40, 1);
    net.send(std::move(ping));
    sched.run();
    REQUIRE(got >= 0);
    CHECK(got >= geo.end_to_end_rtt());
    CHECK(got <= geo.end_to_end_rtt() + milliseconds(1));
}

TEST_CASE("loss decisions are independent across links") {
    // The satellite link's drop pattern is a function of its own stream, not
    // of traffic on other links.
    auto satellite_drops = [](bool extra_traffic) {
        EventScheduler sched;
        TraceLog trace;
        TopologyConfig cfg = TopologyConfig::make(Orbit::leo, 0.01);
        Network net(sched, trace, 7, cfg);
        Datagram sat;
        sat.src = {kPep1, 1};
        sat.dst = {kPep2, 2};
        sat.bytes = ByteVec(500, 0);
        Datagram local;
        local.src = {kClient, 1};
        local.dst = {kPep1, 3};
        local.bytes = ByteVec(500, 0);
        for (int i = 0; i < 2000; ++i) {
            if (extra_traffic) net.send(local);
            net.send(sat);
        }
        sched.run();
        return net.link(kPep1, kPep2).dropped();
    };
    uint64_t a = satellite_drops(false);
    uint64_t b = satellite_drops(true);
    CHECK(a == b);
    CHECK(a > 0);
}

TEST_CASE("identical config and seed replay to identical traces") {
    auto run_once = [] {
        EventScheduler sched;
        TraceLog trace;
        TopologyConfig cfg = TopologyConfig::make(Orbit::leo, 0.01);
        Network net(sched, trace, 1234, cfg);
        int delivered = 0;
        std::string log;
        trace.set_packet_log([&](Time t, const std::string& n, const char* d,
                                 const std::string& s) {
            log += std::to_string(t) + n + d + s + "\n";
        });
        net.attach(kServer, [&](const Datagram&) { ++delivered; });
        netem::Rng traffic(5);
        for (int i = 0; i < 500; ++i) {
            Datagram dg;
            dg.src = {kClient, 1};
            dg.dst = {kServer, 9};
            dg.bytes = traffic.bytes(100 + traffic.below(1000));
            net.send(std::move(dg));
        }
        sched.run();
        return log + "|" + std::to_string(delivered);
    };
    CHECK(run_once() == run_once());
}

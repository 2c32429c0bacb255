#include <doctest.h>

#include "smaq/congestion/controller.hpp"
#include "smaq/netem/rng.hpp"

using namespace smaq;
using namespace smaq::congestion;
using netem::milliseconds;
using netem::Time;

namespace {

Config newreno_cfg() {
    Config cfg;
    cfg.algorithm = Algorithm::newreno;
    return cfg;
}

Config hybla_cfg(Time initial_rtt) {
    Config cfg;
    cfg.algorithm = Algorithm::hybla_westwood;
    cfg.initial_rtt_override = initial_rtt;
    return cfg;
}

}  // namespace

TEST_CASE("initial window is 10 packets") {
    Controller cc(newreno_cfg());
    CHECK(cc.cwnd() == 10 * 1200);
}

TEST_CASE("newreno slow start doubles per acked window, then halves on loss") {
    Controller cc(newreno_cfg());
    cc.sample_rtt(milliseconds(100), 0);
    uint64_t before = cc.cwnd();
    cc.on_packet_sent(before, 0);
    cc.on_ack(before, milliseconds(100), 0, milliseconds(100));
    CHECK(cc.cwnd() == 2 * before);

    // Loss: multiplicative decrease to half.
    uint64_t at_loss = cc.cwnd();
    cc.on_packet_sent(at_loss, milliseconds(110));
    cc.on_loss(1200, milliseconds(110), milliseconds(200));
    CHECK(cc.cwnd() == at_loss / 2);
    CHECK(cc.ssthresh() == at_loss / 2);
    // Only one reduction per recovery episode.
    cc.on_loss(1200, milliseconds(115), milliseconds(201));
    CHECK(cc.cwnd() == at_loss / 2);
}

TEST_CASE("hybla rho and the slow-start growth clamp") {
    // smoothed 500 ms over a 25 ms reference: rho = 20; one acked packet in
    // slow start grows the window by (2^20 - 1) x 1200 clamped to a doubling.
    Controller cc(hybla_cfg(milliseconds(500)));
    CHECK(cc.rho() == doctest::Approx(20.0));
    uint64_t w = cc.cwnd();
    cc.on_packet_sent(1200, 0);
    cc.on_ack(1200, std::nullopt, 0, 1);
    CHECK(cc.cwnd() == std::min(2 * w, cc.window_cap()));

    // rho floors at 1 when smoothed <= reference.
    Controller slow(hybla_cfg(milliseconds(10)));
    CHECK(slow.rho() == doctest::Approx(1.0));
}

TEST_CASE("hybla with rho 1 matches newreno update for update") {
    Config h = hybla_cfg(milliseconds(25));  // rho = 1
    h.initial_rtt_override.reset();
    Config n = newreno_cfg();
    Controller a(h), b(n);
    netem::Rng rng(404);
    Time now = 0;
    for (int i = 0; i < 400; ++i) {
        now += milliseconds(5);
        uint64_t bytes = 1200 * (1 + rng.below(3));
        a.on_packet_sent(bytes, now);
        b.on_packet_sent(bytes, now);
        // Keep rho at 1 by sampling the reference RTT itself.
        std::optional<Time> sample;
        if (rng.below(4) == 0) sample = milliseconds(25);
        uint64_t acked = std::min<uint64_t>(bytes, a.bytes_in_flight());
        a.on_ack(acked, sample, now - milliseconds(2), now);
        b.on_ack(acked, sample, now - milliseconds(2), now);
        if (rng.below(50) == 0) {
            a.on_loss(1200, now - milliseconds(1), now);
            b.on_loss(1200, now - milliseconds(1), now);
        }
        REQUIRE(a.cwnd() == b.cwnd());
    }
}

TEST_CASE("westwood loss response scales with the bandwidth estimate") {
    // BWE x min_rtt = 80 packets against a 100-packet window: shrink to 80,
    // not 50.
    Config cfg = hybla_cfg(milliseconds(100));
    cfg.window_cap_floor_packets = 200;  // keep the cap out of the way
    Controller cc(cfg);
    cc.sample_rtt(milliseconds(100), 0);
    // Feed acks to establish a bandwidth estimate of 80 pkts / 100 ms.
    Time now = 0;
    for (int i = 0; i < 50; ++i) {
        now += milliseconds(100);
        cc.on_packet_sent(80 * 1200, now);
        cc.on_ack(80 * 1200, milliseconds(100), now - 1, now);
    }
    double pipe_pkts = cc.bandwidth_estimate_Bps() * 0.1 / 1200.0;
    CHECK(pipe_pkts == doctest::Approx(80).epsilon(0.1));

    // Force the window to ~100 packets, then lose.
    while (cc.cwnd() < 100 * 1200) {
        now += milliseconds(100);
        cc.on_packet_sent(80 * 1200, now);
        cc.on_ack(80 * 1200, milliseconds(100), now - 1, now);
    }
    uint64_t cwnd_at_loss = cc.cwnd();
    now += milliseconds(10);
    cc.on_loss(1200, now - 1, now);
    uint64_t reno_would = cwnd_at_loss / 2;
    CHECK(cc.cwnd() > reno_would);
    CHECK(cc.cwnd() == doctest::Approx(double(cc.bandwidth_estimate_Bps()) * 0.1)
                           .epsilon(0.15));
}

TEST_CASE("westwood ssthresh after loss is monotone in the bandwidth estimate") {
    netem::Rng rng(777);
    double prev_bwe = 0;
    uint64_t prev_ssthresh = 0;
    for (int trial = 0; trial < 40; ++trial) {
        double target_Bps = 1e5 + double(rng.below(4'000'000));
        Config cfg = hybla_cfg(milliseconds(100));
        cfg.window_cap_floor_packets = 10000;
        cfg.bottleneck_rate_bps = 200'000'000;
        Controller cc(cfg);
        cc.sample_rtt(milliseconds(100), 0);
        Time now = 0;
        uint64_t per_rtt = uint64_t(target_Bps * 0.1);
        for (int i = 0; i < 60; ++i) {
            now += milliseconds(100);
            cc.on_packet_sent(per_rtt, now);
            cc.on_ack(per_rtt, milliseconds(100), now - 1, now);
        }
        cc.on_loss(1200, now - 1, now + 1);
        if (trial > 0 && cc.bandwidth_estimate_Bps() > prev_bwe)
            CHECK(cc.ssthresh() >= prev_ssthresh);
        prev_bwe = cc.bandwidth_estimate_Bps();
        prev_ssthresh = cc.ssthresh();
    }
}

TEST_CASE("pto interval backoff doubles unless disabled") {
    Config cfg = newreno_cfg();
    cfg.initial_rtt_override = milliseconds(1);
    Controller cc(cfg);
    Time base = cc.pto_interval();
    // Disabled during migration: five consecutive timeouts, equal intervals.
    cc.set_backoff_disabled_until_migration(true);
    for (int i = 0; i < 5; ++i) {
        CHECK(cc.pto_interval() == base);
        cc.on_pto_fired(0);
    }
    // Re-enabled: x1, x2, x4 ...
    cc.set_backoff_disabled_until_migration(false);
    Controller cc2(cfg);
    Time b0 = cc2.pto_interval();
    cc2.on_pto_fired(0);
    CHECK(cc2.pto_interval() == 2 * b0);
    cc2.on_pto_fired(0);
    CHECK(cc2.pto_interval() == 4 * b0);
}

TEST_CASE("initial rtt override seeds the estimator") {
    Config cfg = newreno_cfg();
    cfg.initial_rtt_override = milliseconds(1);
    Controller cc(cfg);
    // PTO on the sub-millisecond loop is milliseconds, not the 333 ms default.
    CHECK(cc.pto_interval() < milliseconds(10));
    Controller def(newreno_cfg());
    CHECK(def.pto_interval() >= milliseconds(333));
}

TEST_CASE("window stays within floor and cap under random events") {
    netem::Rng rng(9);
    Config cfg = hybla_cfg(milliseconds(500));
    Controller cc(cfg);
    Time now = 0;
    for (int i = 0; i < 5000; ++i) {
        now += microseconds(500);
        switch (rng.below(4)) {
            case 0:
                cc.on_packet_sent(1200, now);
                break;
            case 1:
                cc.on_ack(1200, milliseconds(1 + rng.below(800)), now - 1, now);
                break;
            case 2:
                cc.on_loss(1200, now - 1, now);
                break;
            case 3:
                cc.on_pto_fired(now);
                break;
        }
        CHECK(cc.cwnd() >= 2 * 1200);
        CHECK(cc.cwnd() <= cc.window_cap());
    }
}

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>

#include "smaq/netem/time.hpp"

namespace smaq::congestion {

using netem::Time;

enum class Algorithm : uint8_t { newreno, hybla_westwood };

struct Config {
    Algorithm algorithm = Algorithm::newreno;
    uint64_t max_packet_size = 1200;
    uint64_t initial_window_packets = 10;
    uint64_t min_window_packets = 2;
    // Window cap: factor x bottleneck rate x min RTT, but at least the floor.
    double window_cap_bdp_factor = 2.0;
    uint64_t bottleneck_rate_bps = 20'000'000;
    uint64_t window_cap_floor_packets = 32;
    Time hybla_rtt0 = netem::milliseconds(25);
    Time initial_rtt = netem::milliseconds(333);
    std::optional<Time> initial_rtt_override;  // smoothed RTT from a previous connection
    Time max_ack_delay = netem::milliseconds(1);
    double pacing_gain = 1.25;            // congestion avoidance
    double pacing_gain_slow_start = 2.0;  // keep the exponential ramp unthrottled
    uint64_t pacing_burst_packets = 10;
};

class RttEstimator {
  public:
    void seed(Time initial) {
        smoothed_ = initial;
        var_ = initial / 2;
    }

    void sample(Time rtt, Time now);

    bool has_sample() const { return has_sample_; }
    Time smoothed() const { return smoothed_; }
    Time var() const { return var_; }
    Time min_rtt() const { return min_rtt_; }
    Time latest() const { return latest_; }

  private:
    bool has_sample_ = false;
    Time smoothed_ = 0;
    Time var_ = 0;
    Time min_rtt_ = netem::kNever;
    Time latest_ = 0;
    Time last_sample_at_ = 0;
};

// Window-based controller with pluggable response rules. NewReno follows the
// standard slow start / congestion avoidance / halving scheme. Hybla-Westwood
// couples Hybla's RTT-compensated growth with Westwood's bandwidth-scaled
// loss response.
class Controller {
  public:
    explicit Controller(const Config& cfg);

    void on_packet_sent(uint64_t bytes, Time now);
    // newest_sent_time: send time of the most recent newly acked packet.
    void on_ack(uint64_t acked_bytes, std::optional<Time> rtt_sample, Time newest_sent_time,
                Time now);
    void on_loss(uint64_t lost_bytes, Time sent_time, Time now);
    void on_pto_fired(Time now);
    void discard_in_flight(uint64_t bytes);  // abandoned without ack or loss response

    uint64_t cwnd() const { return cwnd_; }
    uint64_t ssthresh() const { return ssthresh_; }
    uint64_t bytes_in_flight() const { return bytes_in_flight_; }
    bool can_send(uint64_t bytes) const { return bytes_in_flight_ + bytes <= cwnd_; }
    bool in_slow_start() const { return cwnd_ < ssthresh_; }

    // Probe timeout interval: srtt + max(4 var, 1ms) + max_ack_delay, doubled
    // per consecutive timeout unless backoff is disabled.
    Time pto_interval() const;
    void set_backoff_disabled_until_migration(bool v) { backoff_disabled_ = v; }
    bool backoff_disabled() const { return backoff_disabled_; }
    uint32_t pto_count() const { return pto_count_; }

    // Pacing: token bucket refilled at pacing_gain x cwnd / srtt.
    bool pacer_allows(Time now, uint64_t bytes);
    void pacer_on_sent(Time now, uint64_t bytes);
    Time pacer_ready_at(Time now, uint64_t bytes);

    const RttEstimator& rtt() const { return rtt_; }
    void sample_rtt(Time rtt, Time now) { rtt_.sample(rtt, now); update_rho(); }
    double rho() const { return rho_; }
    double bandwidth_estimate_Bps() const { return bandwidth_est_; }
    uint64_t window_cap() const;
    double pacing_rate_Bps() const;
    Time smoothed_rtt_or_initial() const;
    const Config& config() const { return cfg_; }

  private:
    void update_rho();
    void clamp_window();
    void bandwidth_tick(uint64_t acked_bytes, Time now);

    Config cfg_;
    RttEstimator rtt_;
    uint64_t cwnd_;
    uint64_t ssthresh_ = UINT64_MAX;
    uint64_t bytes_in_flight_ = 0;
    double rho_ = 1.0;
    // Westwood bandwidth estimate, bytes/sec, EWMA over per-RTT windows.
    double bandwidth_est_ = 0.0;
    uint64_t window_acked_ = 0;
    Time window_start_ = -1;
    Time recovery_start_ = -1;
    bool in_recovery_ = false;
    uint32_t pto_count_ = 0;
    bool backoff_disabled_ = false;
    // pacer
    double pacer_tokens_;
    Time pacer_last_ = 0;
};

}  // namespace smaq::congestion

#include "smaq/congestion/controller.hpp"

#include <cmath>

namespace smaq::congestion {

void RttEstimator::sample(Time rtt, Time now) {
    if (rtt <= 0) rtt = 1;
    latest_ = rtt;
    last_sample_at_ = now;
    min_rtt_ = std::min(min_rtt_, rtt);
    if (!has_sample_) {
        smoothed_ = rtt;
        var_ = rtt / 2;
        has_sample_ = true;
        return;
    }
    Time delta = smoothed_ > rtt ? smoothed_ - rtt : rtt - smoothed_;
    var_ = (3 * var_ + delta) / 4;
    smoothed_ = (7 * smoothed_ + rtt) / 8;
}

Controller::Controller(const Config& cfg) : cfg_(cfg) {
    cwnd_ = cfg.initial_window_packets * cfg.max_packet_size;
    if (cfg.initial_rtt_override) rtt_.seed(*cfg.initial_rtt_override);
    pacer_tokens_ = double(cfg.pacing_burst_packets * cfg.max_packet_size);
    update_rho();
    if (cfg.algorithm == Algorithm::hybla_westwood && cfg.initial_rtt_override) {
        // RTT-compensated initial window, mirroring the slow-start rule.
        cwnd_ = uint64_t(double(cwnd_) * rho_);
        clamp_window();
    }
}

Time Controller::smoothed_rtt_or_initial() const {
    if (rtt_.has_sample() || rtt_.smoothed() > 0) return rtt_.smoothed();
    return cfg_.initial_rtt;
}

void Controller::update_rho() {
    if (cfg_.algorithm != Algorithm::hybla_westwood) {
        rho_ = 1.0;
        return;
    }
    double srtt = double(smoothed_rtt_or_initial());
    rho_ = std::max(1.0, srtt / double(cfg_.hybla_rtt0));
}

uint64_t Controller::window_cap() const {
    Time ref_rtt = rtt_.min_rtt() != netem::kNever ? rtt_.min_rtt() : smoothed_rtt_or_initial();
    double bdp = double(cfg_.bottleneck_rate_bps) / 8.0 * netem::to_seconds(ref_rtt);
    uint64_t cap = uint64_t(cfg_.window_cap_bdp_factor * bdp);
    return std::max(cap, cfg_.window_cap_floor_packets * cfg_.max_packet_size);
}

void Controller::clamp_window() {
    cwnd_ = std::min(cwnd_, window_cap());
    cwnd_ = std::max(cwnd_, cfg_.min_window_packets * cfg_.max_packet_size);
}

void Controller::on_packet_sent(uint64_t bytes, Time now) {
    (void)now;
    bytes_in_flight_ += bytes;
}

void Controller::bandwidth_tick(uint64_t acked_bytes, Time now) {
    if (window_start_ < 0) {
        window_start_ = now;
        window_acked_ = acked_bytes;
        return;
    }
    window_acked_ += acked_bytes;
    Time window = std::max<Time>(smoothed_rtt_or_initial(), netem::milliseconds(5));
    Time elapsed = now - window_start_;
    if (elapsed >= window) {
        double sample = double(window_acked_) / netem::to_seconds(elapsed);
        bandwidth_est_ = bandwidth_est_ == 0.0 ? sample : 0.875 * bandwidth_est_ + 0.125 * sample;
        window_start_ = now;
        window_acked_ = 0;
    }
}

void Controller::on_ack(uint64_t acked_bytes, std::optional<Time> rtt_sample,
                        Time newest_sent_time, Time now) {
    bytes_in_flight_ -= std::min(bytes_in_flight_, acked_bytes);
    pto_count_ = 0;
    if (rtt_sample) sample_rtt(*rtt_sample, now);
    bandwidth_tick(acked_bytes, now);
    if (in_recovery_ && newest_sent_time > recovery_start_) in_recovery_ = false;
    if (in_recovery_) return;
    const uint64_t mss = cfg_.max_packet_size;
    if (in_slow_start()) {
        uint64_t growth;
        if (cfg_.algorithm == Algorithm::hybla_westwood) {
            double factor = std::pow(2.0, std::min(rho_, 30.0)) - 1.0;
            double raw = factor * double(acked_bytes);
            // Growth clamp: at most a doubling per ack.
            growth = raw > double(cwnd_) ? cwnd_ : uint64_t(raw);
        } else {
            growth = acked_bytes;
        }
        cwnd_ += growth;
    } else {
        double factor = cfg_.algorithm == Algorithm::hybla_westwood ? rho_ * rho_ : 1.0;
        cwnd_ += uint64_t(factor * double(mss) * double(acked_bytes) / double(cwnd_));
    }
    clamp_window();
}

void Controller::on_loss(uint64_t lost_bytes, Time sent_time, Time now) {
    bytes_in_flight_ -= std::min(bytes_in_flight_, lost_bytes);
    // One response per recovery episode.
    if (in_recovery_ && sent_time <= recovery_start_) return;
    in_recovery_ = true;
    recovery_start_ = now;
    const uint64_t min_window = cfg_.min_window_packets * cfg_.max_packet_size;
    if (cfg_.algorithm == Algorithm::hybla_westwood && bandwidth_est_ > 0.0 &&
        rtt_.min_rtt() != netem::kNever) {
        // Westwood: shrink to the estimated pipe instead of half, and never
        // cut deeper than a halving while the estimate is still warming up.
        uint64_t pipe = uint64_t(bandwidth_est_ * netem::to_seconds(rtt_.min_rtt()));
        ssthresh_ = std::max({pipe, cwnd_ / 2, min_window});
        cwnd_ = std::min(cwnd_, ssthresh_);
    } else {
        ssthresh_ = std::max(cwnd_ / 2, min_window);
        cwnd_ = ssthresh_;
    }
    clamp_window();
}

void Controller::on_pto_fired(Time now) {
    (void)now;
    ++pto_count_;
    if (pto_count_ >= 3) {
        // Persistent congestion: restart from the minimum window.
        cwnd_ = cfg_.min_window_packets * cfg_.max_packet_size;
        ssthresh_ = std::min(ssthresh_, cwnd_ * 2);
    }
}

void Controller::discard_in_flight(uint64_t bytes) {
    bytes_in_flight_ -= std::min(bytes_in_flight_, bytes);
}

Time Controller::pto_interval() const {
    Time srtt = smoothed_rtt_or_initial();
    Time var = rtt_.has_sample() || rtt_.smoothed() > 0 ? rtt_.var() : srtt / 2;
    Time base = srtt + std::max<Time>(4 * var, netem::milliseconds(1)) + cfg_.max_ack_delay;
    if (backoff_disabled_) return base;
    uint32_t shift = std::min(pto_count_, 6u);
    return base << shift;
}

double Controller::pacing_rate_Bps() const {
    Time srtt = smoothed_rtt_or_initial();
    double gain = in_slow_start() ? cfg_.pacing_gain_slow_start : cfg_.pacing_gain;
    return gain * double(cwnd_) / netem::to_seconds(srtt);
}

bool Controller::pacer_allows(Time now, uint64_t bytes) {
    double burst = double(cfg_.pacing_burst_packets * cfg_.max_packet_size);
    pacer_tokens_ = std::min(
        burst, pacer_tokens_ + pacing_rate_Bps() * netem::to_seconds(now - pacer_last_));
    pacer_last_ = now;
    return pacer_tokens_ + 1e-9 >= double(bytes);
}

void Controller::pacer_on_sent(Time now, uint64_t bytes) {
    (void)now;
    pacer_tokens_ -= double(bytes);
}

Time Controller::pacer_ready_at(Time now, uint64_t bytes) {
    if (pacer_allows(now, bytes)) return now;
    double deficit = double(bytes) - pacer_tokens_;
    double secs = deficit / pacing_rate_Bps();
    return now + std::max<Time>(Time(secs * 1e9), netem::microseconds(1));
}

}  // namespace smaq::congestion

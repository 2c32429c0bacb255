#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "smaq/netem/time.hpp"

namespace smaq::netem {

// Discrete-event scheduler. Events fire in non-decreasing time; ties break by
// insertion order, so a (config, seed) pair replays to an identical trace.
class EventScheduler {
  public:
    using Callback = std::function<void()>;

    Time now() const { return now_; }

    void at(Time t, Callback cb) {
        if (t < now_) t = now_;
        queue_.push(Entry{t, next_seq_++, std::move(cb)});
    }

    void after(Time delay, Callback cb) { at(now_ + delay, std::move(cb)); }

    // Runs until the queue drains, the horizon is reached, or a stop is
    // requested. Returns the number of events processed.
    uint64_t run(Time horizon = kNever) {
        stop_requested_ = false;
        uint64_t processed = 0;
        while (!queue_.empty() && !stop_requested_) {
            const Entry& top = queue_.top();
            if (top.t > horizon) break;
            now_ = top.t;
            Callback cb = std::move(const_cast<Entry&>(top).cb);
            queue_.pop();
            cb();
            ++processed;
        }
        if (queue_.empty() && horizon != kNever && now_ < horizon) now_ = horizon;
        return processed;
    }

    void request_stop() { stop_requested_ = true; }

    bool empty() const { return queue_.empty(); }

  private:
    struct Entry {
        Time t;
        uint64_t seq;
        Callback cb;
        bool operator>(const Entry& o) const {
            if (t != o.t) return t > o.t;
            return seq > o.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
    Time now_ = 0;
    uint64_t next_seq_ = 0;
    bool stop_requested_ = false;
};

}  // namespace smaq::netem

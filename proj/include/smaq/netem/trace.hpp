#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "smaq/netem/time.hpp"

namespace smaq::netem {

// Protocol-level milestones recorded on every run; the experiment drivers and
// acceptance checks read these instead of parsing text.
enum class EventKind : uint8_t {
    handshake_keys_ready,
    handshake_confirmed,
    state_created,
    state_offer_sent,
    state_restored,
    smaq_ok,
    smaq_error,
    state_erased,
    early_ping,
    migration_ping,   // endpoint adopted the middlebox path
    path_adopted,
    path_challenge_sent,
    path_validated,
    handshake_done_forwarded,
    handover_fallback,  // continuing as plain QUIC
    first_app_send,
    app_request_sent,
    stream_finished,
    connection_closed,
    idle_timeout,
    migration_given_up,
};

const char* event_name(EventKind k);

struct TraceEvent {
    Time t = 0;
    std::string node;
    EventKind kind;
    uint64_t a = 0;  // event-specific: stream id, error reason, byte count ...
    uint64_t b = 0;
};

// Optional per-packet log line sink; enabled only when a trace file is
// requested. Format: time_ns node direction summary
using PacketLogFn = std::function<void(Time, const std::string& node, const char* direction,
                                       const std::string& summary)>;

class TraceLog {
  public:
    void record(Time t, std::string node, EventKind kind, uint64_t a = 0, uint64_t b = 0) {
        events_.push_back(TraceEvent{t, std::move(node), kind, a, b});
    }

    const std::vector<TraceEvent>& events() const { return events_; }

    // First event of a kind, optionally filtered by node. Returns -1 ns if absent.
    Time first(EventKind kind, std::string_view node = {}) const {
        for (const auto& e : events_)
            if (e.kind == kind && (node.empty() || e.node == node)) return e.t;
        return -1;
    }

    bool has(EventKind kind, std::string_view node = {}) const {
        return first(kind, node) >= 0;
    }

    size_t count(EventKind kind, std::string_view node = {}) const {
        size_t n = 0;
        for (const auto& e : events_)
            if (e.kind == kind && (node.empty() || e.node == node)) ++n;
        return n;
    }

    void set_packet_log(PacketLogFn fn) { packet_log_ = std::move(fn); }
    bool packet_log_enabled() const { return static_cast<bool>(packet_log_); }
    void packet_log(Time t, const std::string& node, const char* direction,
                    const std::string& summary) const {
        if (packet_log_) packet_log_(t, node, direction, summary);
    }

    // Renders the protocol-event log, one line per event.
    std::string render() const;

  private:
    std::vector<TraceEvent> events_;
    PacketLogFn packet_log_;
};

}  // namespace smaq::netem

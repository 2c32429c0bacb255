#include "smaq/netem/trace.hpp"

namespace smaq::netem {

const char* event_name(EventKind k) {
    switch (k) {
        case EventKind::handshake_keys_ready: return "handshake_keys_ready";
        case EventKind::handshake_confirmed: return "handshake_confirmed";
        case EventKind::state_created: return "state_created";
        case EventKind::state_offer_sent: return "state_offer_sent";
        case EventKind::state_restored: return "state_restored";
        case EventKind::smaq_ok: return "smaq_ok";
        case EventKind::smaq_error: return "smaq_error";
        case EventKind::state_erased: return "state_erased";
        case EventKind::early_ping: return "early_ping";
        case EventKind::migration_ping: return "migration_ping";
        case EventKind::path_adopted: return "path_adopted";
        case EventKind::path_challenge_sent: return "path_challenge_sent";
        case EventKind::path_validated: return "path_validated";
        case EventKind::handshake_done_forwarded: return "handshake_done_forwarded";
        case EventKind::handover_fallback: return "handover_fallback";
        case EventKind::first_app_send: return "first_app_send";
        case EventKind::app_request_sent: return "app_request_sent";
        case EventKind::stream_finished: return "stream_finished";
        case EventKind::connection_closed: return "connection_closed";
        case EventKind::idle_timeout: return "idle_timeout";
        case EventKind::migration_given_up: return "migration_given_up";
    }
    return "unknown";
}

std::string TraceLog::render() const {
    std::string out;
    char line[160];
    for (const auto& e : events_) {
        snprintf(line, sizeof(line), "%lld %s %s %llu %llu\n", static_cast<long long>(e.t),
                 e.node.c_str(), event_name(e.kind), static_cast<unsigned long long>(e.a),
                 static_cast<unsigned long long>(e.b));
        out += line;
    }
    return out;
}

}  // namespace smaq::netem

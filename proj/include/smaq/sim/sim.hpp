#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smaq/crypto/xads.hpp"
#include "smaq/handover/middlebox.hpp"
#include "smaq/handover/oob.hpp"
#include "smaq/handover/state.hpp"
#include "smaq/netem/network.hpp"
#include "smaq/netem/scheduler.hpp"
#include "smaq/transport/connection.hpp"

namespace smaq::sim {

using netem::Address;
using netem::Datagram;
using netem::Time;

enum class Mode : uint8_t { quic, smaq_pep };
enum class Workload : uint8_t { bulk, webperf };

enum class Fault : uint8_t {
    none,
    mbox_unreachable,          // out-of-band channel to pep1 blackholed
    reject_version,            // connection uses a version the middlebox lacks
    reject_cipher,
    reject_param,              // client offers an unknown transport parameter
    drop_first_handshake_done,
    ping_blackhole_client,     // middlebox PINGs toward the client never arrive
    pep2_reject,               // transitive handover rejected at pep2
};

struct HostProfile {
    std::string host;
    int resources = 1;
    uint64_t bytes_per_resource = 0;
};

struct RunConfig {
    netem::TopologyConfig topo = netem::TopologyConfig::make(netem::Orbit::geo, 0.0);
    Mode mode = Mode::quic;
    int pep_count = 0;  // 0, 1 or 2 (smaq-pep only)
    uint64_t seed = 1;
    Workload workload = Workload::bulk;
    uint64_t bulk_total_bytes = 0;  // 0 = unbounded until the horizon
    std::vector<HostProfile> page;  // webperf workload
    Time run_until = netem::seconds(31);
    Time curve_interval = netem::milliseconds(100);  // 0 = no sampling
    Fault fault = Fault::none;
    bool secrecy_scan = false;
    bool verify_payload = false;
    bool record_payload = false;
    double window_cap_factor = 2.0;
    bool stop_when_complete = true;
};

enum class Outcome : uint8_t { completed_smaq, completed_plain, closed_error, timed_out };

const char* outcome_name(Outcome o);

struct RunResult {
    netem::TraceLog trace;
    Outcome outcome = Outcome::completed_plain;
    Time keys_time = -1;        // client handshake keys established
    Time confirmed_time = -1;   // client handshake confirmed
    Time migration_time = -1;   // state_created -> migration ping at client
    Time first_app_send = -1;
    Time aplt = -1;             // webperf page completion
    std::vector<uint64_t> curve;  // client application bytes per sample tick
    uint64_t client_received_bytes = 0;
    bool transfer_complete = false;
    bool payload_ok = true;
    ByteVec received_payload;  // filled when record_payload is set
    uint64_t splice_peak = 0;
    int handover_errors = 0;
    bool fallback_plain = false;
    bool state_serialization_clean = true;
    uint64_t early_pings = 0;
    uint64_t forwarded_handshake_done = 0;
    // secrecy scan material
    ByteVec mbox_bytes;
    std::vector<ByteVec> secret_needles;
    std::vector<ByteVec> plaintext_needles;
};

RunResult run_scenario(const RunConfig& cfg);

// Derived run details exposed for tests.
congestion::Config endpoint_cc_config(const RunConfig& cfg);

}  // namespace smaq::sim

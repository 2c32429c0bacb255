#pragma once

#include <deque>
#include <functional>
#include <map>

#include "smaq/transport/connection.hpp"

namespace smaq::handover {

using netem::Address;
using netem::Datagram;
using netem::Time;

// Pre-established out-of-band message channel with 0-RTT semantics: the first
// flight carries payload. Reliable, ordered delivery with sequence-numbered
// retransmission; the RTT estimate stems from the prior session.
class OobEndpoint {
  public:
    OobEndpoint(transport::Env& env, Address local, Address peer, Time rtt_estimate);

    void send(ByteVec message);
    void on_datagram(const Datagram& dg);

    std::function<void(ByteVec)> on_message;
    Time rtt_estimate() const { return rtt_estimate_; }
    const Address& local_address() const { return local_; }

  private:
    void transmit(uint64_t seq, const ByteVec& payload);
    void schedule_retransmit(uint64_t seq);

    transport::Env& env_;
    Address local_, peer_;
    Time rtt_estimate_;
    uint64_t next_tx_seq_ = 0;
    std::map<uint64_t, ByteVec> unacked_;
    uint64_t next_rx_seq_ = 0;
    std::map<uint64_t, ByteVec> rx_buffer_;
};

// SMAQ handover messages carried over the channel.
enum class OobType : uint8_t { state_offer = 1, smaq_ok = 2, smaq_error = 3 };

struct OobMessage {
    OobType type = OobType::state_offer;
    uint32_t session = 0;
    ByteVec payload;  // state bytes for offers, reason octet for errors
};

ByteVec encode_oob(const OobMessage& m);
std::optional<OobMessage> decode_oob(ByteSpan in);

}  // namespace smaq::handover

#include "smaq/handover/oob.hpp"

#include "smaq/transport/wire.hpp"

namespace smaq::handover {

using transport::get_varint;
using transport::put_varint;

OobEndpoint::OobEndpoint(transport::Env& env, Address local, Address peer, Time rtt_estimate)
    : env_(env), local_(local), peer_(peer), rtt_estimate_(std::max<Time>(rtt_estimate, 1)) {}

void OobEndpoint::send(ByteVec message) {
    uint64_t seq = next_tx_seq_++;
    unacked_[seq] = message;
    transmit(seq, message);
    schedule_retransmit(seq);
}

void OobEndpoint::transmit(uint64_t seq, const ByteVec& payload) {
    Datagram dg;
    dg.src = local_;
    dg.dst = peer_;
    dg.tag = netem::tag_oob;
    dg.bytes.push_back(0);  // data
    put_varint(dg.bytes, seq);
    append(dg.bytes, payload);
    env_.send_datagram(std::move(dg));
}

void OobEndpoint::schedule_retransmit(uint64_t seq) {
    env_.schedule(env_.now() + 2 * rtt_estimate_, [this, seq] {
        auto it = unacked_.find(seq);
        if (it == unacked_.end()) return;
        transmit(seq, it->second);
        schedule_retransmit(seq);
    });
}

void OobEndpoint::on_datagram(const Datagram& dg) {
    if (dg.bytes.empty()) return;
    size_t off = 1;
    auto seq = get_varint(dg.bytes, off);
    if (!seq) return;
    if (dg.bytes[0] == 1) {  // ack
        unacked_.erase(*seq);
        return;
    }
    // data: ack it, dedupe, deliver in order
    Datagram ack;
    ack.src = local_;
    ack.dst = peer_;
    ack.tag = netem::tag_oob;
    ack.bytes.push_back(1);
    put_varint(ack.bytes, *seq);
    env_.send_datagram(std::move(ack));

    if (*seq < next_rx_seq_ || rx_buffer_.count(*seq)) return;
    rx_buffer_[*seq].assign(dg.bytes.begin() + off, dg.bytes.end());
    while (true) {
        auto it = rx_buffer_.find(next_rx_seq_);
        if (it == rx_buffer_.end()) break;
        ByteVec msg = std::move(it->second);
        rx_buffer_.erase(it);
        ++next_rx_seq_;
        if (on_message) on_message(std::move(msg));
    }
}

ByteVec encode_oob(const OobMessage& m) {
    ByteVec out;
    out.push_back(static_cast<uint8_t>(m.type));
    put_u32(out, m.session);
    append(out, m.payload);
    return out;
}

std::optional<OobMessage> decode_oob(ByteSpan in) {
    if (in.size() < 5) return std::nullopt;
    OobMessage m;
    uint8_t t = in[0];
    if (t < 1 || t > 3) return std::nullopt;
    m.type = static_cast<OobType>(t);
    m.session = get_u32(in.data() + 1);
    m.payload.assign(in.begin() + 5, in.end());
    return m;
}

}  // namespace smaq::handover

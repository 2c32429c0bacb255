#include "smaq/transport/connection.hpp"

#include <algorithm>
#include <cassert>

namespace smaq::transport {

using netem::EventKind;

namespace {

constexpr uint64_t kPnRestoreJump = 64;  // gap above handed-over packet numbers
constexpr int kPacketThreshold = 3;
constexpr int kMaxChallengeSends = 5;
constexpr size_t kMaxAckRanges = 16;

const std::string kSupportedParams[] = {
    "smaq", "max_ack_delay_ms", "idle_timeout_ms", "max_datagram_size", "ack_threshold",
};

}  // namespace

bool transport_param_supported(const std::string& name) {
    for (const auto& p : kSupportedParams)
        if (p == name) return true;
    return false;
}

// ---- RecvTracker ----

bool Connection::RecvTracker::note(uint64_t pn) {
    if (has_floor && pn <= floor) return false;
    auto it = std::lower_bound(ranges.begin(), ranges.end(), pn,
                               [](const AckRange& r, uint64_t v) { return r.hi < v; });
    if (it != ranges.end() && it->lo <= pn) return false;  // duplicate
    // Insert, merging with neighbours.
    bool merge_prev = it != ranges.begin() && (it - 1)->hi + 1 == pn;
    bool merge_next = it != ranges.end() && it->lo == pn + 1;
    if (merge_prev && merge_next) {
        (it - 1)->hi = it->hi;
        ranges.erase(it);
    } else if (merge_prev) {
        (it - 1)->hi = pn;
    } else if (merge_next) {
        it->lo = pn;
    } else {
        ranges.insert(it, AckRange{pn, pn});
    }
    if (ranges.size() > kMaxAckRanges) ranges.erase(ranges.begin());
    return true;
}

std::vector<AckRange> Connection::RecvTracker::to_ack_ranges() const {
    std::vector<AckRange> out(ranges.rbegin(), ranges.rend());
    return out;
}

// ---- construction ----

Connection::Connection(Env& env, ConnConfig cfg, Callbacks cb)
    : env_(env),
      cfg_(std::move(cfg)),
      cb_(std::move(cb)),
      label_(cfg_.label.empty() ? env.node() : cfg_.label),
      peer_(cfg_.peer),
      original_peer_(cfg_.peer),
      cc_(cfg_.cc) {
    local_cid_ = env_.rng().bytes(8);
    local_reset_token_ = env_.rng().bytes(16);
    if (cfg_.role == Role::server) {
        // Awaits the client Initial; address validation pending.
        peer_address_validated_ = false;
    } else {
        peer_address_validated_ = true;
    }
    touch_idle();
}

std::unique_ptr<Connection> Connection::restore(Env& env, ConnConfig cfg, Callbacks cb,
                                                const RestoreInfo& info) {
    cfg.quic_version = info.quic_version;
    cfg.cipher_suite = info.cipher_suite;
    auto conn = std::make_unique<Connection>(env, std::move(cfg), std::move(cb));
    Connection& c = *conn;
    c.keys_.client_traffic = info.client_traffic;
    c.keys_.server_traffic = info.server_traffic;
    c.keys_.client_hp = info.client_hp;
    c.keys_.server_hp = info.server_hp;
    c.key_phase_ = info.key_phase;
    c.exporter_master_.reset();  // XADS material never reaches a facade
    bool as_server = sends_as_server(c.cfg_.role);
    // The facade owns the handed-over identity of the side it impersonates.
    c.local_cid_ = as_server ? info.server_cid : info.client_cid;
    c.local_cid_seq_ = as_server ? info.server_cid_seq : info.client_cid_seq;
    c.local_reset_token_ = as_server ? info.server_reset_token : info.client_reset_token;
    c.peer_cid_ = as_server ? info.client_cid : info.server_cid;
    c.peer_cid_seq_ = as_server ? info.client_cid_seq : info.server_cid_seq;
    c.peer_reset_token_ = as_server ? info.client_reset_token : info.server_reset_token;
    c.peer_params_ = as_server ? info.client_params : info.server_params;
    c.cfg_.params = as_server ? info.server_params : info.client_params;
    auto& app = c.spaces_[int(Space::application)];
    // High-water marks arrive one past the highest used value (0 = none).
    app.next_pn = (as_server ? info.server_highest_sent : info.client_highest_sent) +
                  kPnRestoreJump;
    uint64_t peer_next = as_server ? info.client_highest_sent : info.server_highest_sent;
    if (peer_next > 0) {
        app.recv.floor = peer_next - 1;
        app.recv.has_floor = true;
        c.path_change_pn_ = peer_next - 1;
    }
    c.hs_ = HandshakeState::confirmed;
    c.peer_address_validated_ = true;
    c.install_packet_protection();
    c.touch_idle();
    c.arm();
    return conn;
}

void Connection::setup_endpoint_keys(ByteSpan client_random, ByteSpan server_random) {
    keys_ = crypto::derive_transport_keys(client_random, server_random);
    exporter_master_ = keys_.exporter_master;
    install_packet_protection();
}

void Connection::install_packet_protection() {
    const crypto::Secret& tx =
        sends_as_server(cfg_.role) ? keys_.server_traffic : keys_.client_traffic;
    const crypto::Secret& rx =
        sends_as_server(cfg_.role) ? keys_.client_traffic : keys_.server_traffic;
    const crypto::Secret& tx_hp = sends_as_server(cfg_.role) ? keys_.server_hp : keys_.client_hp;
    const crypto::Secret& rx_hp = sends_as_server(cfg_.role) ? keys_.client_hp : keys_.server_hp;
    crypto::PacketKeys txk = crypto::derive_packet_keys(tx);
    crypto::PacketKeys rxk = crypto::derive_packet_keys(rx);
    tx_prot_ = PacketProtection{crypto::Aead(txk.key, txk.iv),
                                ByteVec(tx_hp.bytes.begin(), tx_hp.bytes.begin() + 8)};
    rx_prot_ = PacketProtection{crypto::Aead(rxk.key, rxk.iv),
                                ByteVec(rx_hp.bytes.begin(), rx_hp.bytes.begin() + 8)};
}

// ---- client handshake ----

void Connection::connect() {
    assert(cfg_.role == Role::client);
    client_random_ = env_.rng().bytes(32);
    initial_dcid_ = env_.rng().bytes(8);
    peer_cid_ = initial_dcid_;
    hs_ = HandshakeState::initial_sent;
    initial_pending_ = true;
    maybe_send();
    arm();
}

void Connection::queue_initial() {
    CryptoStubFrame cs;
    cs.quic_version = cfg_.quic_version;
    cs.cipher_suite = cfg_.cipher_suite;
    cs.random = client_random_;
    cs.scid = local_cid_;
    cs.reset_token = local_reset_token_;
    cs.transport_params = cfg_.params.map;
    std::vector<Frame> frames;
    frames.push_back(std::move(cs));
    // Pad the Initial to the full datagram size (amplification accounting).
    std::vector<RetxItem> retx{RetxItem{RetxItem::crypto, 0, 0, 0, false}};
    send_packet(Space::initial, std::move(frames), std::move(retx), true, false);
}

void Connection::queue_server_handshake() {
    CryptoStubFrame cs;
    cs.quic_version = cfg_.quic_version;
    cs.cipher_suite = cfg_.cipher_suite;
    cs.random = server_random_;
    cs.scid = local_cid_;
    cs.reset_token = local_reset_token_;
    cs.transport_params = cfg_.params.map;
    std::vector<Frame> frames;
    attach_ack(Space::initial, frames);
    frames.push_back(std::move(cs));
    std::vector<RetxItem> retx{RetxItem{RetxItem::crypto, 0, 0, 0, false}};
    send_packet(Space::handshake, std::move(frames), std::move(retx), true, false);
}

void Connection::queue_finished() {
    CryptoStubFrame cs;
    cs.quic_version = cfg_.quic_version;
    cs.cipher_suite = cfg_.cipher_suite;
    cs.finished = true;
    cs.scid = local_cid_;
    std::vector<Frame> frames;
    attach_ack(Space::handshake, frames);
    frames.push_back(std::move(cs));
    std::vector<RetxItem> retx{RetxItem{RetxItem::crypto, 0, 0, 0, false}};
    send_packet(Space::handshake, std::move(frames), std::move(retx), true, false);
}

// ---- receive ----

void Connection::on_datagram(const Datagram& dg) {
    if (closed()) return;
    ByteSpan bytes(dg.bytes.data(), dg.bytes.size());
    auto header = peek_header(bytes);
    if (!header) return;
    const PacketProtection* prot = nullptr;
    if (header->space == Space::application) {
        if (!rx_prot_) return;  // keys not ready
        prot = &*rx_prot_;
    }
    auto pkt = parse_packet(bytes, prot);
    if (!pkt) {
        ++decrypt_failures_;
        return;
    }
    handle_packet(*pkt, dg.src, dg.tag);
}

void Connection::handle_packet(const Packet& pkt, const Address& from, uint8_t) {
    SpaceState& sp = spaces_[int(pkt.space)];

    bool had_ping = false, had_stream = false;
    bool ack_eliciting = false;
    for (const Frame& f : pkt.frames) {
        if (std::holds_alternative<PingFrame>(f)) had_ping = true;
        if (std::holds_alternative<StreamFrame>(f)) had_stream = true;
        if (frame_is_ack_eliciting(f)) ack_eliciting = true;
    }

    // Handover hold: drop application data arriving from the original server
    // path unprocessed, so the state restored on the middlebox stays
    // consistent. The packet is not acknowledged; normal loss recovery
    // redelivers the data through the middlebox after migration.
    if (drop_original_path_streams_ && had_stream && from == original_peer_) {
        env_.trace().record(env_.now(), label_, EventKind::early_ping, 0, 1);
        return;
    }

    // Packets from an unknown path before the handshake is confirmed never
    // move the path and are not acknowledged. Their frames are still
    // processed (a forwarded HANDSHAKE_DONE must reach the client this way).
    // Handshake-space packets establish the path and are exempt.
    if (pkt.space == Space::application && !(from == peer_) && !confirmed()) {
        if (had_ping) {
            ++early_pings_;
            env_.trace().record(env_.now(), label_, EventKind::early_ping, pkt.packet_number);
        }
        for (const Frame& f : pkt.frames) {
            if (std::holds_alternative<HandshakeDoneFrame>(f) ||
                std::holds_alternative<ConnectionCloseFrame>(f))
                handle_frame(f, pkt.space, pkt, from);
        }
        maybe_send();
        arm();
        return;
    }

    if (!sp.recv.note(pkt.packet_number)) {
        ++duplicate_packets_;
        if (ack_eliciting) {
            sp.recv.ack_pending = true;
            maybe_send();
        }
        return;
    }
    touch_idle();

    if (cfg_.role == Role::server && !peer_address_validated_) {
        bytes_received_pre_validation_ += 1200;  // datagram-sized credit
    }

    if (!(from == peer_)) maybe_adopt_path(pkt, from, had_ping);

    if (ack_eliciting) {
        sp.recv.ack_pending = true;
        ++sp.recv.eliciting_since_ack;
        uint64_t threshold = 2;
        auto it = cfg_.params.map.find("ack_threshold");
        if (it != cfg_.params.map.end()) threshold = it->second;
        if (uint64_t(sp.recv.eliciting_since_ack) < threshold) {
            Time delay = netem::milliseconds(1);
            if (ack_at_ == netem::kNever) ack_at_ = env_.now() + delay;
        } else {
            ack_at_ = env_.now();
        }
    }

    for (const Frame& f : pkt.frames) handle_frame(f, pkt.space, pkt, from);

    if (pinging_ && from == peer_) {
        peer_seen_since_ping_ = true;
        stop_migration_pings();
    }
    if (release_hold_on_peer_activity_ && from == peer_) {
        release_hold_on_peer_activity_ = false;
        suppress_sends_ = false;
    }

    maybe_send();
    arm();
}

void Connection::maybe_adopt_path(const Packet& pkt, const Address& from, bool had_ping) {
    if (ignore_path_change_ || pkt.space != Space::application) return;
    bool non_probing = false;
    for (const Frame& f : pkt.frames) {
        if (!std::holds_alternative<PathChallengeFrame>(f) &&
            !std::holds_alternative<PathResponseFrame>(f) &&
            !std::holds_alternative<AckFrame>(f) && !std::holds_alternative<PaddingFrame>(f))
            non_probing = true;
    }
    if (!non_probing) return;
    if (pkt.packet_number <= path_change_pn_) return;  // stale relative to current path
    path_change_pn_ = pkt.packet_number;

    if (cfg_.validate_on_path_change) {
        if (pending_path_ && *pending_path_ == from) return;
        pending_path_ = from;
        challenge_token_ = env_.rng().next();
        challenge_sends_ = 0;
        env_.trace().record(env_.now(), label_, EventKind::path_challenge_sent,
                            pkt.packet_number);
        std::vector<Frame> frames{PathChallengeFrame{*challenge_token_}};
        send_packet(Space::application, std::move(frames), {}, true, false, from);
        ++challenge_sends_;
        path_retx_at_ = env_.now() + cc_.pto_interval();
        if (had_ping)
            env_.trace().record(env_.now(), label_, EventKind::migration_ping, pkt.packet_number);
        return;
    }

    // Clients and facades adopt directly; reachability was verified by the
    // out-of-band handover exchange.
    peer_ = from;
    env_.trace().record(env_.now(), label_, EventKind::path_adopted, pkt.packet_number);
    if (had_ping)
        env_.trace().record(env_.now(), label_, EventKind::migration_ping, pkt.packet_number);
    if (cb_.on_migrated) cb_.on_migrated();
}

void Connection::handle_frame(const Frame& f, Space space, const Packet& pkt,
                              const Address& from) {
    if (closed()) return;
    if (std::holds_alternative<AckFrame>(f)) {
        handle_ack(std::get<AckFrame>(f), space);
    } else if (std::holds_alternative<StreamFrame>(f)) {
        handle_stream_frame(std::get<StreamFrame>(f));
    } else if (std::holds_alternative<CryptoStubFrame>(f)) {
        handle_crypto_stub(std::get<CryptoStubFrame>(f), from);
    } else if (std::holds_alternative<HandshakeDoneFrame>(f)) {
        if (cfg_.role == Role::client && hs_ != HandshakeState::confirmed) {
            become_confirmed();
        }
        if (cb_.on_handshake_done_frame) cb_.on_handshake_done_frame();
    } else if (std::holds_alternative<PathChallengeFrame>(f)) {
        response_pending_ = {std::get<PathChallengeFrame>(f).token, from};
    } else if (std::holds_alternative<PathResponseFrame>(f)) {
        const auto& pr = std::get<PathResponseFrame>(f);
        if (challenge_token_ && pr.token == *challenge_token_ && pending_path_) {
            peer_ = *pending_path_;
            pending_path_.reset();
            challenge_token_.reset();
            path_retx_at_ = netem::kNever;
            env_.trace().record(env_.now(), label_, EventKind::path_validated,
                                pkt.packet_number);
            env_.trace().record(env_.now(), label_, EventKind::path_adopted,
                                pkt.packet_number);
            if (cb_.on_migrated) cb_.on_migrated();
            notify_writable();
        }
    } else if (std::holds_alternative<ConnectionCloseFrame>(f)) {
        if (!closed()) {
            close_reason_ = CloseReason::peer_close;
            env_.trace().record(env_.now(), label_, EventKind::connection_closed,
                                uint64_t(close_reason_));
            if (cb_.on_closed) cb_.on_closed(close_reason_);
        }
    }
}

void Connection::handle_crypto_stub(const CryptoStubFrame& cs, const Address& from) {
    switch (cfg_.role) {
        case Role::server: {
            if (cs.finished) {
                if (hs_ != HandshakeState::confirmed && keys_ready()) {
                    peer_address_validated_ = true;
                    spaces_[int(Space::handshake)].inflight.clear();
                    become_confirmed();
                    hd_pending_ = true;
                }
                return;
            }
            if (hs_ != HandshakeState::idle) return;  // duplicate Initial
            peer_ = from;
            original_peer_ = from;
            peer_cid_ = cs.scid;
            peer_reset_token_ = cs.reset_token;
            peer_params_.map = cs.transport_params;
            client_random_ = cs.random;
            server_random_ = env_.rng().bytes(32);
            setup_endpoint_keys(client_random_, server_random_);
            hs_ = HandshakeState::keys_established;
            env_.trace().record(env_.now(), label_, EventKind::handshake_keys_ready);
            if (cb_.on_keys_established) cb_.on_keys_established();
            hs_flight_pending_ = true;
            return;
        }
        case Role::client: {
            if (hs_ != HandshakeState::initial_sent) return;  // duplicate
            spaces_[int(Space::initial)].inflight.clear();
            peer_cid_ = cs.scid;
            peer_reset_token_ = cs.reset_token;
            peer_params_.map = cs.transport_params;
            server_random_ = cs.random;
            setup_endpoint_keys(client_random_, server_random_);
            hs_ = HandshakeState::keys_established;
            finished_pending_ = true;
            maybe_send();  // finished flight precedes the callback's traffic
            env_.trace().record(env_.now(), label_, EventKind::handshake_keys_ready);
            if (cb_.on_keys_established) cb_.on_keys_established();
            return;
        }
        default:
            return;  // facades never see crypto stubs
    }
}

void Connection::become_confirmed() {
    hs_ = HandshakeState::confirmed;
    env_.trace().record(env_.now(), label_, EventKind::handshake_confirmed);
    if (cfg_.role == Role::client) spaces_[int(Space::handshake)].inflight.clear();
    if (cb_.on_confirmed) cb_.on_confirmed();
}

void Connection::handle_ack(const AckFrame& ack, Space space) {
    SpaceState& sp = spaces_[int(space)];
    uint64_t newly_acked_bytes = 0;
    std::optional<Time> rtt_sample;
    Time newest_sent = -1;
    uint64_t largest_newly = 0;
    bool any = false;
    for (const AckRange& r : ack.ranges) {
        auto it = sp.inflight.lower_bound(r.lo);
        while (it != sp.inflight.end() && it->first <= r.hi) {
            const SentPacketInfo& info = it->second;
            if (info.in_cc) newly_acked_bytes += info.bytes;
            if (info.ack_eliciting && it->first >= largest_newly) {
                largest_newly = it->first;
                if (it->first == ack.largest())
                    rtt_sample = env_.now() - info.sent;
            }
            newest_sent = std::max(newest_sent, info.sent);
            for (const RetxItem& item : info.retx) {
                if (item.kind == RetxItem::stream_range)
                    stream_acked_range(item.stream_id, item.off, item.off + item.len, item.fin);
                if (item.kind == RetxItem::handshake_done) hd_pending_ = false;
            }
            any = true;
            it = sp.inflight.erase(it);
        }
    }
    if (!any) return;
    if (sp.largest_acked == UINT64_MAX || ack.largest() > sp.largest_acked)
        sp.largest_acked = ack.largest();
    cc_.on_ack(newly_acked_bytes, rtt_sample, newest_sent, env_.now());
    detect_losses(space, env_.now());
    rearm_pto();
    notify_writable();
}

// Probe timeout tracks the newest ack-eliciting packet still outstanding.
void Connection::rearm_pto() {
    Time next = netem::kNever;
    for (int s = 0; s < kSpaceCount; ++s) {
        SpaceState& sp = spaces_[s];
        bool has_eliciting = false;
        for (const auto& [pn, info] : sp.inflight) {
            if (info.ack_eliciting) {
                has_eliciting = true;
                break;
            }
        }
        if (!has_eliciting) continue;
        next = std::min(next, sp.last_eliciting_sent + cc_.pto_interval());
    }
    pto_at_ = next;
}

void Connection::detect_losses(Space space, Time now) {
    // Packet-threshold detection; tails are covered by the probe timeout.
    SpaceState& sp = spaces_[int(space)];
    if (sp.largest_acked == UINT64_MAX) return;
    std::vector<std::pair<uint64_t, SentPacketInfo>> lost;
    for (auto it = sp.inflight.begin();
         it != sp.inflight.end() && it->first < sp.largest_acked;) {
        if (sp.largest_acked - it->first >= kPacketThreshold) {
            lost.emplace_back(it->first, std::move(it->second));
            it = sp.inflight.erase(it);
        } else {
            break;  // map is ordered; later packets are closer to the ack edge
        }
    }
    for (auto& [pn, info] : lost) {
        (void)pn;
        if (info.in_cc) cc_.on_loss(info.bytes, info.sent, now);
        for (const RetxItem& item : info.retx) requeue(item);
    }
    if (!lost.empty()) maybe_send();
}

void Connection::requeue(const RetxItem& item) {
    switch (item.kind) {
        case RetxItem::stream_range: {
            auto it = send_streams_.find(item.stream_id);
            if (it == send_streams_.end()) return;
            SendStream& ss = it->second;
            // Skip parts already acknowledged.
            uint64_t off = item.off, end = item.off + item.len;
            for (const AckRange& r : ss.acked) {
                if (r.lo <= off && off < r.hi) off = r.hi;
                if (r.lo < end && end <= r.hi) end = r.lo;
            }
            if (off < ss.base) off = ss.base;
            if (off < end || (item.fin && !ss.fin_acked)) {
                ss.retx.emplace_back(off, std::max(off, end));
                if (item.fin) ss.fin_sent = false;
                mark_send_ready(item.stream_id, ss);
            }
            break;
        }
        case RetxItem::handshake_done:
            hd_pending_ = true;
            break;
        case RetxItem::crypto:
            if (cfg_.role == Role::client && hs_ == HandshakeState::initial_sent)
                initial_pending_ = true;
            else if (cfg_.role == Role::server && hs_ == HandshakeState::keys_established)
                hs_flight_pending_ = true;
            else if (cfg_.role == Role::client && hs_ == HandshakeState::keys_established)
                finished_pending_ = true;
            break;
    }
}

// ---- streams ----

void Connection::mark_send_ready(uint64_t id, SendStream& ss) {
    if (ss.queued_for_send) return;
    ss.queued_for_send = true;
    send_ready_.push_back(id);
}

uint64_t Connection::open_stream() {
    uint64_t id = next_stream_id_;
    next_stream_id_ += 4;
    send_streams_[id];
    return id;
}

void Connection::stream_write(uint64_t id, ByteSpan data, bool fin) {
    if (closed()) return;
    auto it = send_streams_.find(id);
    if (it == send_streams_.end()) it = send_streams_.emplace(id, SendStream{}).first;
    SendStream& ss = it->second;
    if (ss.fin_queued) throw std::logic_error("stream_write: stream already finished");
    append(ss.buf, data);
    if (fin) {
        ss.fin_queued = true;
        ss.final_off = ss.end_off();
    }
    mark_send_ready(id, ss);
    maybe_send();
    arm();
}

size_t Connection::stream_send_budget(uint64_t id) const {
    auto it = send_streams_.find(id);
    size_t held = it == send_streams_.end() ? 0 : it->second.buffered();
    return held >= cfg_.stream_send_limit ? 0 : cfg_.stream_send_limit - held;
}

bool Connection::stream_fully_acked(uint64_t id) const {
    auto it = send_streams_.find(id);
    if (it == send_streams_.end()) return false;
    return it->second.fin_queued && it->second.fin_acked;
}

uint64_t Connection::splice_buffer_bytes() const {
    uint64_t total = 0;
    for (const auto& [id, ss] : send_streams_) total += ss.buffered();
    return total;
}

void Connection::stream_acked_range(uint64_t id, uint64_t off, uint64_t end, bool fin) {
    auto it = send_streams_.find(id);
    if (it == send_streams_.end()) return;
    SendStream& ss = it->second;
    if (fin) ss.fin_acked = true;
    if (off < end) {
        // Merge the half-open [off, end) into the ordered disjoint set.
        auto pos = std::lower_bound(ss.acked.begin(), ss.acked.end(), off,
                                    [](const AckRange& r, uint64_t v) { return r.lo < v; });
        if (pos != ss.acked.begin() && (pos - 1)->hi >= off) {
            --pos;
            pos->hi = std::max(pos->hi, end);
        } else {
            pos = ss.acked.insert(pos, AckRange{off, end});
        }
        while (pos + 1 != ss.acked.end() && (pos + 1)->lo <= pos->hi) {
            pos->hi = std::max(pos->hi, (pos + 1)->hi);
            ss.acked.erase(pos + 1);
        }
    }
    // Advance base over the contiguous acked prefix and release the bytes.
    while (!ss.acked.empty() && ss.acked.front().lo <= ss.base) {
        uint64_t new_base = std::max(ss.base, ss.acked.front().hi);
        size_t advance = size_t(new_base - ss.base);
        ss.start += advance;
        ss.base = new_base;
        ss.acked.erase(ss.acked.begin());
    }
    if (ss.start > ss.buf.size() / 2 && ss.start > 65536) {
        ss.buf.erase(ss.buf.begin(), ss.buf.begin() + ss.start);
        ss.start = 0;
    }
}

void Connection::handle_stream_frame(const StreamFrame& sf) {
    RecvStream& rs = recv_streams_[sf.stream_id];
    if (sf.fin) rs.final_off = sf.offset + sf.data.size();
    uint64_t off = sf.offset;
    ByteSpan data(sf.data.data(), sf.data.size());
    if (off + data.size() > rs.delivered) {
        if (off < rs.delivered) {
            data = data.subspan(size_t(rs.delivered - off));
            off = rs.delivered;
        }
        // Trim against buffered segments; keep the new non-overlapping tail.
        while (!data.empty()) {
            auto next = rs.segments.lower_bound(off);
            bool covered = false;
            if (next != rs.segments.begin()) {
                auto prev = std::prev(next);
                uint64_t prev_end = prev->first + prev->second.size();
                if (prev_end > off) {
                    uint64_t skip = std::min<uint64_t>(prev_end - off, data.size());
                    data = data.subspan(size_t(skip));
                    off += skip;
                    covered = true;
                }
            }
            if (covered) continue;
            uint64_t limit = next == rs.segments.end() ? off + data.size()
                                                       : std::min<uint64_t>(next->first,
                                                                            off + data.size());
            size_t take = size_t(limit - off);
            if (take > 0) {
                rs.segments.emplace(off, ByteVec(data.begin(), data.begin() + take));
                data = data.subspan(take);
                off += take;
            }
            if (take == 0) {
                // fully covered by the next segment
                uint64_t next_end = next->first + next->second.size();
                uint64_t skip = std::min<uint64_t>(next_end - off, data.size());
                data = data.subspan(size_t(skip));
                off += skip;
            }
        }
    }
    deliver_recv_prefix(sf.stream_id, rs);
}

void Connection::deliver_recv_prefix(uint64_t id, RecvStream& rs) {
    while (true) {
        auto it = rs.segments.begin();
        bool more = it != rs.segments.end() && it->first <= rs.delivered;
        bool fin_now = !more && rs.final_off && *rs.final_off == rs.delivered &&
                       !rs.fin_delivered;
        if (!more && !fin_now) break;
        if (more) {
            ByteVec seg = std::move(it->second);
            uint64_t seg_off = it->first;
            rs.segments.erase(it);
            size_t skip = size_t(rs.delivered - seg_off);
            if (skip >= seg.size()) continue;
            rs.delivered += seg.size() - skip;
            bool fin = rs.final_off && *rs.final_off == rs.delivered;
            if (fin) rs.fin_delivered = true;
            if (cb_.on_stream_data)
                cb_.on_stream_data(id, ByteSpan(seg.data() + skip, seg.size() - skip), fin);
        } else {
            rs.fin_delivered = true;
            if (cb_.on_stream_data) cb_.on_stream_data(id, ByteSpan(), true);
        }
    }
}

// ---- send ----

void Connection::attach_ack(Space space, std::vector<Frame>& frames) {
    SpaceState& sp = spaces_[int(space)];
    if (!sp.recv.ack_pending || sp.recv.ranges.empty()) return;
    AckFrame ack;
    ack.ranges = sp.recv.to_ack_ranges();
    frames.push_back(std::move(ack));
    sp.recv.ack_pending = false;
    sp.recv.eliciting_since_ack = 0;
    ack_at_ = netem::kNever;
}

void Connection::send_packet(Space space, std::vector<Frame> frames,
                             std::vector<RetxItem> retx, bool ack_eliciting, bool in_cc,
                             std::optional<Address> to) {
    SpaceState& sp = spaces_[int(space)];
    Packet pkt;
    pkt.space = space;
    pkt.dcid = peer_cid_.empty() ? initial_dcid_ : peer_cid_;
    pkt.packet_number = sp.next_pn++;
    pkt.frames = std::move(frames);
    if (space == Space::initial && cfg_.role == Role::client) {
        // Pad to the full datagram size.
        ByteVec probe = serialize_packet(pkt, nullptr);
        if (probe.size() + 3 < kMaxPacketSize) {
            pkt.frames.push_back(
                PaddingFrame{uint32_t(kMaxPacketSize - probe.size() - 3)});
        }
    }
    const PacketProtection* prot =
        space == Space::application ? (tx_prot_ ? &*tx_prot_ : nullptr) : nullptr;
    if (space == Space::application && prot == nullptr) return;
    ByteVec wire = serialize_packet(pkt, prot);

    if (cfg_.role == Role::server && !peer_address_validated_) {
        if (bytes_sent_pre_validation_ + wire.size() >
            3 * std::max<uint64_t>(bytes_received_pre_validation_, 1200)) {
            --sp.next_pn;
            return;  // amplification limit
        }
        bytes_sent_pre_validation_ += wire.size();
    }

    SentPacketInfo info;
    info.bytes = uint32_t(wire.size());
    info.sent = env_.now();
    info.ack_eliciting = ack_eliciting;
    info.in_cc = in_cc;
    info.retx = std::move(retx);
    if (ack_eliciting) {
        sp.last_eliciting_sent = info.sent;
        rearm_pto();
    }
    if (in_cc) cc_.on_packet_sent(info.bytes, info.sent);
    sp.inflight.emplace(pkt.packet_number, std::move(info));

    bool has_stream = false;
    for (const Frame& f : pkt.frames) {
        if (std::holds_alternative<StreamFrame>(f)) {
            has_stream = true;
            dbg_stream_payload += std::get<StreamFrame>(f).data.size();
        }
        if (std::holds_alternative<AckFrame>(f)) {
            ++dbg_acks_attached;
            dbg_ack_ranges += std::get<AckFrame>(f).ranges.size();
        }
    }
    if (has_stream) {
        ++dbg_stream_pkts;
        dbg_wire_bytes += wire.size();
    }
    (void)0;
    if (has_stream && !first_app_send_traced_) {
        first_app_send_traced_ = true;
        env_.trace().record(env_.now(), label_, EventKind::first_app_send);
    }

    Datagram dg;
    dg.src = cfg_.local;
    dg.dst = to.value_or(peer_);
    dg.tag = datagram_tag_for(pkt);
    dg.bytes = std::move(wire);
    env_.send_datagram(std::move(dg));
}

bool Connection::send_one_control_packet() {
    // Close frame has absolute priority and is terminal.
    if (closed() && !close_frame_sent_) {
        close_frame_sent_ = true;
        std::vector<Frame> frames{ConnectionCloseFrame{uint64_t(close_reason_), ""}};
        send_packet(Space::application, std::move(frames), {}, false, false);
        return false;
    }
    if (closed()) return false;
    if (initial_pending_) {
        initial_pending_ = false;
        queue_initial();
        return true;
    }
    if (hs_flight_pending_) {
        hs_flight_pending_ = false;
        queue_server_handshake();
        return true;
    }
    if (finished_pending_) {
        finished_pending_ = false;
        queue_finished();
        return true;
    }
    if (response_pending_) {
        auto [token, addr] = *response_pending_;
        response_pending_.reset();
        std::vector<Frame> frames{PathResponseFrame{token}};
        attach_ack(Space::application, frames);
        send_packet(Space::application, std::move(frames), {}, true, false, addr);
        return true;
    }
    if (hd_pending_ && hs_ == HandshakeState::confirmed && rx_prot_) {
        hd_pending_ = false;
        std::vector<Frame> frames;
        attach_ack(Space::application, frames);
        frames.push_back(HandshakeDoneFrame{});
        std::vector<RetxItem> retx{RetxItem{RetxItem::handshake_done, 0, 0, 0, false}};
        send_packet(Space::application, std::move(frames), std::move(retx), true, false);
        return true;
    }
    // Standalone acks.
    for (int s = 0; s < kSpaceCount; ++s) {
        SpaceState& sp = spaces_[s];
        bool due = sp.recv.ack_pending &&
                   (sp.recv.eliciting_since_ack >= 2 ||
                    (ack_at_ != netem::kNever && env_.now() >= ack_at_));
        if (s != int(Space::application)) due = sp.recv.ack_pending;
        if (!due) continue;
        if (Space(s) == Space::application && !tx_prot_) continue;
        std::vector<Frame> frames;
        attach_ack(Space(s), frames);
        if (frames.empty()) continue;
        send_packet(Space(s), std::move(frames), {}, false, false);
        return true;
    }
    return false;
}

bool Connection::send_one_stream_packet() {
    if (closed() || !tx_prot_) return false;
    if (suppress_sends_) return false;
    if (cfg_.validate_on_path_change && pending_path_) return false;  // path not validated yet
    if (send_ready_.empty()) return false;

    // Estimate space: header + pn + stream TLV overhead + AEAD tag.
    size_t header_overhead = 2 + peer_cid_.size() + 8 + crypto::kAeadTagLen;
    size_t frame_overhead = 24;
    size_t room = kMaxPacketSize - header_overhead - frame_overhead;

    if (!cc_.can_send(kMaxPacketSize)) return false;
    if (!cc_.pacer_allows(env_.now(), kMaxPacketSize)) {
        pacing_at_ = cc_.pacer_ready_at(env_.now(), kMaxPacketSize);
        return false;
    }

    // Round-robin over ready streams.
    while (!send_ready_.empty()) {
        uint64_t id = send_ready_.front();
        auto it = send_streams_.find(id);
        if (it == send_streams_.end()) {
            send_ready_.pop_front();
            continue;
        }
        SendStream& ss = it->second;
        StreamFrame sf;
        sf.stream_id = id;
        bool from_retx = false;
        if (!ss.retx.empty()) {
            auto [off, end] = ss.retx.front();
            uint64_t len = std::min<uint64_t>(end - off, room);
            sf.offset = off;
            if (len > 0) {
                size_t idx = ss.start + size_t(off - ss.base);
                sf.data.assign(ss.buf.begin() + idx, ss.buf.begin() + idx + size_t(len));
            }
            if (off + len == end) {
                ss.retx.pop_front();
            } else {
                ss.retx.front().first = off + len;
            }
            sf.fin = ss.fin_queued && off + len == ss.final_off;
            from_retx = true;
        } else {
            uint64_t avail = ss.end_off() - ss.next_off;
            uint64_t len = std::min<uint64_t>(avail, room);
            bool want_fin = ss.fin_queued && !ss.fin_sent && ss.next_off + len == ss.final_off;
            if (len == 0 && !want_fin) {
                send_ready_.pop_front();
                continue;
            }
            sf.offset = ss.next_off;
            if (len > 0) {
                size_t idx = ss.start + size_t(ss.next_off - ss.base);
                sf.data.assign(ss.buf.begin() + idx, ss.buf.begin() + idx + size_t(len));
            }
            ss.next_off += len;
            sf.fin = want_fin;
            if (want_fin) ss.fin_sent = true;
        }
        // Keep the stream in rotation if it still has work.
        send_ready_.pop_front();
        ss.queued_for_send = false;
        if (!ss.retx.empty() || ss.next_off < ss.end_off() ||
            (ss.fin_queued && !ss.fin_sent))
            mark_send_ready(id, ss);

        if (sf.data.empty() && !sf.fin && from_retx) continue;

        std::vector<Frame> frames;
        attach_ack(Space::application, frames);
        std::vector<RetxItem> retx{RetxItem{RetxItem::stream_range, sf.stream_id, sf.offset,
                                            sf.data.size(), sf.fin}};
        frames.push_back(std::move(sf));
        send_packet(Space::application, std::move(frames), std::move(retx), true, true);
        return true;
    }
    return false;
}

void Connection::maybe_send() {
    if (!close_frame_sent_ && closed()) {
        send_one_control_packet();
        return;
    }
    while (send_one_control_packet()) {
    }
    while (send_one_stream_packet()) {
    }
    arm();
}

// ---- SMAQ hooks ----

void Connection::start_migration_pings() {
    pinging_ = true;
    peer_seen_since_ping_ = false;
    ping_started_ = env_.now();
    cc_.set_backoff_disabled_until_migration(true);
    ping_at_ = env_.now();
    service();
}

void Connection::stop_migration_pings() {
    if (!pinging_) return;
    pinging_ = false;
    ping_at_ = netem::kNever;
    cc_.set_backoff_disabled_until_migration(false);
}

void Connection::set_handover_hold(bool hold) {
    suppress_sends_ = hold;
    drop_original_path_streams_ = hold;
    if (!hold) {
        maybe_send();
        arm();
    }
}

void Connection::hold_sends_until_peer_activity() {
    suppress_sends_ = true;
    release_hold_on_peer_activity_ = true;
}

void Connection::send_handshake_done() {
    hd_pending_ = true;
    maybe_send();
    arm();
}

void Connection::append_held_bytes(ByteVec& out) const {
    append(out, keys_.client_traffic.bytes);
    append(out, keys_.server_traffic.bytes);
    append(out, keys_.client_hp.bytes);
    append(out, keys_.server_hp.bytes);
    if (exporter_master_) append(out, exporter_master_->bytes);
    for (const auto& [id, ss] : send_streams_) {
        (void)id;
        out.insert(out.end(), ss.buf.begin() + ss.start, ss.buf.end());
    }
    for (const auto& [id, rs] : recv_streams_) {
        (void)id;
        for (const auto& [off, seg] : rs.segments) {
            (void)off;
            append(out, seg);
        }
    }
}

void Connection::close(CloseReason reason, uint64_t) {
    if (closed()) return;
    close_reason_ = reason;
    env_.trace().record(env_.now(), label_, EventKind::connection_closed, uint64_t(reason));
    if (reason != CloseReason::idle_timeout) {
        close_frame_sent_ = false;
        send_one_control_packet();
    }
    pinging_ = false;
    if (cb_.on_closed) cb_.on_closed(reason);
}

// ---- timers ----

void Connection::touch_idle() { idle_at_ = env_.now() + cfg_.idle_timeout; }

Time Connection::next_deadline() {
    Time next = idle_at_;
    next = std::min(next, pto_at_);
    next = std::min(next, ack_at_);
    next = std::min(next, ping_at_);
    next = std::min(next, path_retx_at_);
    next = std::min(next, pacing_at_);
    return next;
}

void Connection::arm() {
    if (closed()) return;
    Time next = next_deadline();
    if (next == netem::kNever) return;
    if (armed_at_ != netem::kNever && armed_at_ <= next && armed_at_ >= env_.now()) return;
    armed_at_ = next;
    uint64_t epoch = ++alarm_epoch_;
    env_.schedule(next, [this, epoch] {
        if (epoch != alarm_epoch_) return;
        armed_at_ = netem::kNever;
        service();
    });
}

void Connection::service() {
    if (closed()) return;
    Time now = env_.now();
    if (now >= idle_at_) {
        close_reason_ = CloseReason::idle_timeout;
        env_.trace().record(now, label_, EventKind::idle_timeout);
        if (cb_.on_closed) cb_.on_closed(CloseReason::idle_timeout);
        return;
    }
    if (pto_at_ != netem::kNever && now >= pto_at_) on_pto(now);
    if (pinging_ && ping_at_ != netem::kNever && now >= ping_at_) {
        if (now - ping_started_ >= cfg_.migration_ping_give_up) {
            env_.trace().record(now, label_, EventKind::migration_given_up);
            pinging_ = false;
            close(CloseReason::migration_failed);
            return;
        }
        // Timer-driven probes: the ping timer is the retransmission scheme,
        // so they stay out of the PTO inflight bookkeeping.
        std::vector<Frame> frames{PingFrame{}};
        attach_ack(Space::application, frames);
        send_packet(Space::application, std::move(frames), {}, false, false);
        ping_at_ = now + cc_.pto_interval();
    }
    if (path_retx_at_ != netem::kNever && now >= path_retx_at_) {
        if (challenge_token_ && pending_path_) {
            if (challenge_sends_ >= kMaxChallengeSends) {
                path_retx_at_ = netem::kNever;
                close(CloseReason::path_validation_failed);
                return;
            }
            std::vector<Frame> frames{PathChallengeFrame{*challenge_token_}};
            send_packet(Space::application, std::move(frames), {}, true, false, *pending_path_);
            ++challenge_sends_;
            path_retx_at_ = now + cc_.pto_interval();
        } else {
            path_retx_at_ = netem::kNever;
        }
    }
    if (pacing_at_ != netem::kNever && now >= pacing_at_) pacing_at_ = netem::kNever;
    maybe_send();
    arm();
}

void Connection::on_pto(Time now) {
    pto_at_ = netem::kNever;
    // Probe: retransmit the oldest ack-eliciting packet's content per space.
    bool any_inflight = false;
    for (int s = 0; s < kSpaceCount; ++s) {
        SpaceState& sp = spaces_[s];
        auto it = sp.inflight.begin();
        while (it != sp.inflight.end() && !it->second.ack_eliciting) ++it;
        if (it == sp.inflight.end()) continue;
        any_inflight = true;
        SentPacketInfo info = std::move(it->second);
        sp.inflight.erase(it);
        if (info.in_cc) cc_.discard_in_flight(info.bytes);
        for (const RetxItem& item : info.retx) requeue(item);
    }
    if (!any_inflight) return;
    cc_.on_pto_fired(now);
    maybe_send();
    rearm_pto();
    if (pto_at_ != netem::kNever && pto_at_ <= now)
        pto_at_ = now + cc_.pto_interval();
}

void Connection::notify_writable() {
    if (cb_.on_writable) cb_.on_writable();
}

std::string Connection::debug_state() const {
    char buf[512];
    const SpaceState& app = spaces_[int(Space::application)];
    uint64_t buffered = 0, retxq = 0, next_gap = 0;
    for (const auto& [id, ss] : send_streams_) {
        buffered += ss.buffered();
        for (auto& r : ss.retx) retxq += r.second - r.first;
        next_gap += ss.end_off() - ss.next_off;
    }
    snprintf(buf, sizeof(buf),
             "hs=%d closed=%d suppress=%d pending_path=%d ready=%zu inflight_pkts=%zu "
             "buffered=%llu retxq=%llu unsent=%llu cc_inflight=%llu cwnd=%llu "
             "pto_at=%lld pacing_at=%lld armed=%lld",
             int(hs_), int(closed()), int(suppress_sends_), int(pending_path_.has_value()),
             send_ready_.size(), app.inflight.size(), (unsigned long long)buffered,
             (unsigned long long)retxq, (unsigned long long)next_gap,
             (unsigned long long)cc_.bytes_in_flight(), (unsigned long long)cc_.cwnd(),
             (long long)pto_at_, (long long)pacing_at_, (long long)armed_at_);
    return buf;
}

// ---- accessors ----

const crypto::Secret& Connection::exporter_master() const {
    if (!exporter_master_) throw std::logic_error("exporter secret unavailable");
    return *exporter_master_;
}

bool Connection::peer_supports(const std::string& param) const {
    auto it = peer_params_.map.find(param);
    return it != peer_params_.map.end() && it->second == 1;
}

const ByteVec& Connection::client_cid() const {
    return cfg_.role == Role::client || cfg_.role == Role::mbox_server_facing ? local_cid_
                                                                              : peer_cid_;
}
const ByteVec& Connection::server_cid() const {
    return sends_as_server(cfg_.role) ? local_cid_ : peer_cid_;
}
uint64_t Connection::client_cid_seq() const {
    return cfg_.role == Role::client ? local_cid_seq_ : peer_cid_seq_;
}
uint64_t Connection::server_cid_seq() const {
    return sends_as_server(cfg_.role) ? local_cid_seq_ : peer_cid_seq_;
}
const ByteVec& Connection::client_reset_token() const {
    return cfg_.role == Role::client ? local_reset_token_ : peer_reset_token_;
}
const ByteVec& Connection::server_reset_token() const {
    return sends_as_server(cfg_.role) ? local_reset_token_ : peer_reset_token_;
}

// Packet-number high-water marks, encoded one past the highest used value so
// that zero means "none yet".
uint64_t Connection::highest_sent_pn(bool client_side) const {
    const SpaceState& app = spaces_[int(Space::application)];
    bool we_are_that_side = (cfg_.role == Role::client) == client_side;
    if (we_are_that_side) return app.next_pn;
    return app.recv.ranges.empty() && !app.recv.has_floor ? 0 : app.recv.largest() + 1;
}

uint64_t Connection::highest_recv_pn(bool client_side) const {
    const SpaceState& app = spaces_[int(Space::application)];
    bool we_are_that_side = (cfg_.role == Role::client) == client_side;
    if (we_are_that_side)
        return app.recv.ranges.empty() && !app.recv.has_floor ? 0 : app.recv.largest() + 1;
    // Peer's receive high-water mark: the highest of our packets it acked.
    return app.largest_acked == UINT64_MAX ? 0 : app.largest_acked + 1;
}

}  // namespace smaq::transport

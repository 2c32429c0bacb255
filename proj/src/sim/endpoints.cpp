#include "endpoints.hpp"

#include <charconv>

namespace smaq::sim {

using netem::EventKind;
using transport::ConnConfig;
using transport::Connection;
using transport::Role;

namespace {

constexpr size_t kResponseChunk = 16384;
constexpr size_t kServerWriteTarget = 512 * 1024;  // stream buffer fill target

congestion::Config base_cc(const RunConfig& cfg) {
    congestion::Config cc;
    cc.bottleneck_rate_bps = cfg.topo.downlink_rate_bps;
    cc.window_cap_bdp_factor = cfg.window_cap_factor;
    return cc;
}

transport::TransportParams endpoint_params(const RunConfig& cfg, bool is_client) {
    transport::TransportParams p;
    p.map["max_ack_delay_ms"] = 1;
    p.map["max_datagram_size"] = transport::kMaxPacketSize;
    if (cfg.mode == Mode::smaq_pep) p.map["smaq"] = 1;
    if (is_client && cfg.fault == Fault::reject_param) p.map["reserved_experiment"] = 1;
    return p;
}

}  // namespace

congestion::Config endpoint_cc_config(const RunConfig& cfg) {
    congestion::Config cc = base_cc(cfg);
    cc.algorithm = congestion::Algorithm::newreno;
    return cc;
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::completed_smaq: return "completed-smaq";
        case Outcome::completed_plain: return "completed-plain";
        case Outcome::closed_error: return "closed-error";
        case Outcome::timed_out: return "timed-out";
    }
    return "?";
}

// ---------------- ServerNode ----------------

struct ServerNode::ServerConn {
    std::unique_ptr<Connection> conn;
    uint16_t local_port = 0;
    std::optional<crypto::XadsKeySchedule> xads;
    std::map<uint64_t, crypto::XadsSealer> tx;
    std::map<uint64_t, crypto::XadsOpener> rx;
    struct Responder {
        uint64_t remaining = 0;
        bool unbounded = false;
        bool fin_sent = false;
        netem::Rng gen{0};
        ByteVec request_buf;
        bool active = false;
    };
    std::map<uint64_t, Responder> responders;
};

ServerNode::ServerNode(netem::Network& net, const RunConfig& cfg)
    : net_(net),
      cfg_(cfg),
      env_(net, netem::kServer, netem::Rng::derive(cfg.seed, "node/server")) {}

ServerNode::~ServerNode() = default;

void ServerNode::on_datagram(const Datagram& dg) {
    auto header = transport::peek_header(ByteSpan(dg.bytes.data(), dg.bytes.size()));
    if (!header) return;
    auto it = by_cid_.find(header->dcid);
    if (it != by_cid_.end()) {
        it->second->conn->on_datagram(dg);
        return;
    }
    if (header->space == transport::Space::initial) accept(dg);
}

void ServerNode::accept(const Datagram& dg) {
    auto header = transport::peek_header(ByteSpan(dg.bytes.data(), dg.bytes.size()));
    auto sc = std::make_unique<ServerConn>();
    ServerConn* raw = sc.get();
    raw->local_port = dg.dst.port;

    ConnConfig cfg;
    cfg.role = Role::server;
    cfg.local = Address{netem::kServer, dg.dst.port};
    cfg.peer = dg.src;  // set authoritatively by the crypto stub
    cfg.params = endpoint_params(cfg_, false);
    cfg.cc = endpoint_cc_config(cfg_);
    cfg.validate_on_path_change = true;
    cfg.label = "server";

    transport::Callbacks cbs;
    cbs.on_keys_established = [this, raw] {
        raw->xads = crypto::XadsKeySchedule::from_exporter(raw->conn->exporter_master());
    };
    cbs.on_stream_data = [this, raw](uint64_t id, ByteSpan data, bool fin) {
        on_request(*raw, id, data, fin);
    };
    cbs.on_writable = [this, raw] { pump_responses(*raw); };

    sc->conn = std::make_unique<Connection>(env_, std::move(cfg), std::move(cbs));
    by_cid_[header->dcid] = raw;           // the client's chosen initial dcid
    by_cid_[sc->conn->local_cid()] = raw;  // our connection id
    conns_.push_back(std::move(sc));
    raw->conn->on_datagram(dg);
}

void ServerNode::on_request(ServerConn& sc, uint64_t stream_id, ByteSpan data, bool fin) {
    (void)fin;
    if (!sc.xads) return;
    auto [it, fresh] = sc.rx.try_emplace(
        stream_id, sc.xads->stream_secret(crypto::Sender::client, stream_id));
    auto& responder = sc.responders[stream_id];
    ByteVec plain;
    if (!it->second.feed(data, plain)) {
        sc.conn->close(transport::CloseReason::protocol_error);
        return;
    }
    append(responder.request_buf, plain);
    if (responder.active) return;
    // Request: "GET <n>\n"; n == 0 streams until the horizon.
    auto nl = std::find(responder.request_buf.begin(), responder.request_buf.end(), '\n');
    if (nl == responder.request_buf.end()) return;
    std::string line(responder.request_buf.begin(), nl);
    uint64_t n = 0;
    if (line.rfind("GET ", 0) == 0)
        std::from_chars(line.data() + 4, line.data() + line.size(), n);
    responder.active = true;
    responder.unbounded = n == 0;
    responder.remaining = n;
    responder.gen = payload_rng(cfg_.seed, sc.local_port, stream_id);
    pump_responses(sc);
}

void ServerNode::pump_responses(ServerConn& sc) {
    if (!sc.xads || sc.conn->closed()) return;
    for (auto& [stream_id, r] : sc.responders) {
        if (!r.active || r.fin_sent) continue;
        auto [tx_it, fresh] = sc.tx.try_emplace(
            stream_id, sc.xads->stream_secret(crypto::Sender::server, stream_id));
        crypto::XadsSealer& sealer = tx_it->second;
        while (r.unbounded || r.remaining > 0) {
            size_t budget = sc.conn->stream_send_budget(stream_id);
            if (budget <= kServerWriteTarget) break;
            size_t chunk = kResponseChunk;
            if (!r.unbounded) chunk = size_t(std::min<uint64_t>(chunk, r.remaining));
            ByteVec payload = r.gen.bytes(chunk);
            ByteVec records;
            sealer.seal(payload, records);
            if (!r.unbounded) r.remaining -= chunk;
            bool fin = !r.unbounded && r.remaining == 0;
            sc.conn->stream_write(stream_id, records, fin);
            if (fin) {
                r.fin_sent = true;
                break;
            }
        }
    }
}

// ---------------- PepNode ----------------

PepNode::PepNode(netem::Network& net, const RunConfig& cfg, int index)
    : net_(net),
      cfg_(cfg),
      index_(index),
      env_(net, index == 1 ? netem::kPep1 : netem::kPep2,
           netem::Rng::derive(cfg.seed, index == 1 ? "node/pep1" : "node/pep2")) {
    if (cfg_.fault == Fault::reject_version && index == 1)
        support_.quic_versions = {1};  // the connection will use another version
    if (cfg_.fault == Fault::pep2_reject && index == 2) support_.quic_versions = {999};

    if (index == 1) {
        Time rtt = cfg.topo.segment_rtt(netem::kClient, netem::kPep1);
        oob_up_ = std::make_unique<handover::OobEndpoint>(
            env_, Address{netem::kPep1, kOobClientPep1Port},
            Address{netem::kClient, kOobClientPep1Port}, rtt);
        oob_up_->on_message = [this](ByteVec m) { on_oob_client_side(std::move(m)); };
        if (cfg.pep_count >= 2) {
            Time down_rtt = cfg.topo.segment_rtt(netem::kPep1, netem::kPep2);
            oob_down_ = std::make_unique<handover::OobEndpoint>(
                env_, Address{netem::kPep1, kOobPep1Pep2Port},
                Address{netem::kPep2, kOobPep1Pep2Port}, down_rtt);
            oob_down_->on_message = [this](ByteVec m) { on_oob_pep2_side(std::move(m)); };
        }
    } else {
        Time rtt = cfg.topo.segment_rtt(netem::kPep1, netem::kPep2);
        oob_up_ = std::make_unique<handover::OobEndpoint>(
            env_, Address{netem::kPep2, kOobPep1Pep2Port},
            Address{netem::kPep1, kOobPep1Pep2Port}, rtt);
        oob_up_->on_message = [this](ByteVec m) { on_oob_client_side(std::move(m)); };
    }
}

handover::MboxSessionConfig PepNode::session_config(uint32_t session_id) const {
    handover::MboxSessionConfig mc;
    uint16_t base = uint16_t((index_ == 1 ? 20000 : 30000) + 2 * session_id);
    netem::NodeId self = index_ == 1 ? netem::kPep1 : netem::kPep2;
    mc.client_facing_local = Address{self, base};
    mc.server_facing_local = Address{self, uint16_t(base + 1)};

    congestion::Config client_side = base_cc(cfg_);
    congestion::Config server_side = base_cc(cfg_);
    if (index_ == 1) {
        // Client-facing loop: seeded from the out-of-band channel's RTT, as
        // learned from the prior session; the satellite loop runs the
        // loss-resilient controller.
        client_side.algorithm = congestion::Algorithm::newreno;
        client_side.initial_rtt_override = cfg_.topo.segment_rtt(netem::kClient, netem::kPep1);
        if (cfg_.pep_count >= 2) {
            server_side.algorithm = congestion::Algorithm::hybla_westwood;
            server_side.initial_rtt_override =
                cfg_.topo.segment_rtt(netem::kPep1, netem::kPep2);
        } else {
            server_side.algorithm = congestion::Algorithm::hybla_westwood;
            server_side.initial_rtt_override =
                cfg_.topo.segment_rtt(netem::kPep1, netem::kServer);
        }
    } else {
        client_side.algorithm = congestion::Algorithm::hybla_westwood;
        client_side.initial_rtt_override = cfg_.topo.segment_rtt(netem::kPep1, netem::kPep2);
        server_side.algorithm = congestion::Algorithm::newreno;
    }
    mc.cc_client_side = client_side;
    mc.cc_server_side = server_side;
    mc.ping_client = true;
    // In the distributed setup pep1 delegates the server-side migration to
    // pep2; a single middlebox migrates both endpoints itself.
    mc.ping_server = index_ == 2 || (index_ == 1 && cfg_.pep_count == 1);
    return mc;
}

void PepNode::handle_offer(uint32_t session_id, ByteSpan payload) {
    auto state = handover::SmaqState::deserialize(payload);
    handover::OobEndpoint& reply_to = *oob_up_;
    if (!state) return;
    if (auto err = handover::check_restorable(*state, support_)) {
        env_.trace().record(env_.now(), env_.node(), EventKind::smaq_error, uint64_t(*err));
        handover::OobMessage m;
        m.type = handover::OobType::smaq_error;
        m.session = session_id;
        m.payload.push_back(uint8_t(*err));
        reply_to.send(encode_oob(m));
        return;  // no state retained
    }
    Session& s = sessions_[session_id];
    s.mbox = std::make_unique<handover::MboxSession>(env_, *state, session_config(session_id));
    port_to_session_[s.mbox->client_facing().local_address().port] = session_id;
    port_to_session_[s.mbox->server_facing().local_address().port] = session_id;
    env_.trace().record(env_.now(), env_.node(), EventKind::state_restored, session_id);

    handover::OobMessage ok;
    ok.type = handover::OobType::smaq_ok;
    ok.session = session_id;
    reply_to.send(encode_oob(ok));
    env_.trace().record(env_.now(), env_.node(), EventKind::smaq_ok, session_id);

    s.mbox->start();

    if (index_ == 1 && cfg_.pep_count >= 2) {
        // Transitive handover: replace the client address with our own
        // server-facing address and pass the state on.
        handover::SmaqState altered = handover::alter_client_address(
            *state, s.mbox->server_facing().local_address());
        handover::OobMessage offer;
        offer.type = handover::OobType::state_offer;
        offer.session = session_id;
        offer.payload = altered.serialize();
        oob_down_->send(encode_oob(offer));
        env_.trace().record(env_.now(), env_.node(), EventKind::state_offer_sent, session_id);
        Time deadline = env_.now() + 3 * oob_down_->rtt_estimate();
        env_.schedule(deadline, [this, session_id] {
            auto it = sessions_.find(session_id);
            if (it == sessions_.end() || it->second.transitive_done) return;
            it->second.transitive_done = true;
            env_.trace().record(env_.now(), env_.node(), EventKind::handover_fallback,
                                session_id);
            it->second.mbox->start_server_side_pings();
        });
    }
}

void PepNode::on_oob_client_side(ByteVec msg) {
    auto m = handover::decode_oob(msg);
    if (!m) return;
    if (m->type == handover::OobType::state_offer) handle_offer(m->session, m->payload);
}

void PepNode::on_oob_pep2_side(ByteVec msg) {
    auto m = handover::decode_oob(msg);
    if (!m) return;
    auto it = sessions_.find(m->session);
    if (it == sessions_.end() || it->second.transitive_done) return;
    if (m->type == handover::OobType::smaq_ok) {
        it->second.transitive_ok = true;
        it->second.transitive_done = true;
    } else if (m->type == handover::OobType::smaq_error) {
        it->second.transitive_done = true;
        env_.trace().record(env_.now(), env_.node(), EventKind::handover_fallback, m->session);
        it->second.mbox->start_server_side_pings();
    }
}

void PepNode::on_datagram(const Datagram& dg) {
    if (dg.dst.port == kOobClientPep1Port || dg.dst.port == kOobPep1Pep2Port) {
        if (index_ == 1 && dg.dst.port == kOobPep1Pep2Port && oob_down_) {
            oob_down_->on_datagram(dg);
        } else {
            oob_up_->on_datagram(dg);
        }
        return;
    }
    auto it = port_to_session_.find(dg.dst.port);
    if (it == port_to_session_.end()) return;
    sessions_[it->second].mbox->on_datagram(dg);
}

uint64_t PepNode::splice_buffer_bytes() const {
    uint64_t total = 0;
    for (const auto& [id, s] : sessions_)
        if (s.mbox) total += s.mbox->splice_buffer_bytes();
    return total;
}

void PepNode::append_held_bytes(ByteVec& out) const {
    for (const auto& [id, s] : sessions_)
        if (s.mbox) s.mbox->append_held_bytes(out);
}

void PepNode::debug_dump() const {
    for (const auto& [id, s] : sessions_) {
        if (!s.mbox) continue;
        auto dump = [](const char* tag, const transport::Connection& c) {
            printf("    %s: pkts=%llu payload=%llu wire=%llu avg_payload=%.1f avg_wire=%.1f acks=%llu ranges=%llu\n",
                   tag, (unsigned long long)c.dbg_stream_pkts,
                   (unsigned long long)c.dbg_stream_payload,
                   (unsigned long long)c.dbg_wire_bytes,
                   c.dbg_stream_pkts ? double(c.dbg_stream_payload) / c.dbg_stream_pkts : 0,
                   c.dbg_stream_pkts ? double(c.dbg_wire_bytes) / c.dbg_stream_pkts : 0,
                   (unsigned long long)c.dbg_acks_attached,
                   (unsigned long long)c.dbg_ack_ranges);
        };
        auto& mbox = const_cast<handover::MboxSession&>(*s.mbox);
        dump("client-facing", mbox.client_facing());
        dump("server-facing", mbox.server_facing());
    }
}

uint64_t PepNode::forwarded_handshake_done() const {
    uint64_t total = 0;
    for (const auto& [id, s] : sessions_)
        if (s.mbox) total += s.mbox->forwarded_handshake_done();
    return total;
}

// ---------------- ClientNode ----------------

ClientNode::ClientNode(netem::Network& net, const RunConfig& cfg, RunResult& result)
    : net_(net),
      cfg_(cfg),
      result_(result),
      env_(net, netem::kClient, netem::Rng::derive(cfg.seed, "node/client")) {
    if (cfg.mode == Mode::smaq_pep) {
        Time rtt = cfg.topo.segment_rtt(netem::kClient, netem::kPep1);
        oob_ = std::make_unique<handover::OobEndpoint>(
            env_, Address{netem::kClient, kOobClientPep1Port},
            Address{netem::kPep1, kOobClientPep1Port}, rtt);
        oob_->on_message = [this](ByteVec m) { on_oob_message(std::move(m)); };
    }
}

void ClientNode::start() {
    size_t count = cfg_.workload == Workload::webperf ? cfg_.page.size() : 1;
    for (size_t i = 0; i < count; ++i) {
        auto cc = std::make_unique<ClientConn>();
        ClientConn* raw = cc.get();
        raw->server_port = uint16_t(kServerBasePort + i);

        ConnConfig ccfg;
        ccfg.role = Role::client;
        ccfg.local = Address{netem::kClient, uint16_t(kClientBasePort + i)};
        ccfg.peer = Address{netem::kServer, raw->server_port};
        ccfg.params = endpoint_params(cfg_, true);
        ccfg.cc = endpoint_cc_config(cfg_);
        if (cfg_.fault == Fault::reject_version) ccfg.quic_version = 2;
        if (cfg_.fault == Fault::reject_cipher) ccfg.cipher_suite = 0x1399;
        ccfg.label = "client";

        size_t idx = conns_.size();
        transport::Callbacks cbs;
        cbs.on_keys_established = [this, idx] { on_keys_established(idx); };
        cbs.on_stream_data = [this, idx](uint64_t id, ByteSpan data, bool fin) {
            on_stream_data(idx, id, data, fin);
        };
        cbs.on_migrated = [this, idx] {
            ClientConn& c = *conns_[idx];
            if (c.abandoned) return;
            c.migrated = true;
            c.conn->set_handover_hold(false);
        };
        cc->conn = std::make_unique<Connection>(env_, std::move(ccfg), std::move(cbs));
        conns_.push_back(std::move(cc));
    }
    for (auto& c : conns_) c->conn->connect();
}

void ClientNode::on_datagram(const Datagram& dg) {
    if (oob_ && dg.dst.port == kOobClientPep1Port) {
        oob_->on_datagram(dg);
        return;
    }
    for (auto& c : conns_) {
        if (c->conn->local_address().port == dg.dst.port) {
            c->conn->on_datagram(dg);
            return;
        }
    }
}

void ClientNode::on_keys_established(size_t idx) {
    ClientConn& c = *conns_[idx];
    c.xads = crypto::XadsKeySchedule::from_exporter(c.conn->exporter_master());
    bool smaq = cfg_.mode == Mode::smaq_pep && c.conn->local_params().smaq() &&
                c.conn->peer_supports("smaq");
    if (smaq) begin_handover(idx);
    send_requests(idx);
}

void ClientNode::begin_handover(size_t idx) {
    ClientConn& c = *conns_[idx];
    c.handover_active = true;
    c.conn->set_handover_hold(true);
    handover::SmaqState state = handover::create_state(*c.conn);
    ByteVec bytes = state.serialize();
    env_.trace().record(env_.now(), "client", EventKind::state_created, idx);
    // State objects never carry XADS material.
    if (contains(bytes, c.xads->master().bytes)) result_.state_serialization_clean = false;
    handover::OobMessage offer;
    offer.type = handover::OobType::state_offer;
    offer.session = uint32_t(idx);
    offer.payload = std::move(bytes);
    oob_->send(encode_oob(offer));
    env_.trace().record(env_.now(), "client", EventKind::state_offer_sent, idx);
    // Unreachable-middlebox fallback.
    Time deadline = env_.now() + 3 * oob_->rtt_estimate();
    env_.schedule(deadline, [this, idx] {
        ClientConn& cc = *conns_[idx];
        if (cc.ok_received || cc.migrated || cc.abandoned) return;
        fallback(idx);
    });
}

void ClientNode::fallback(size_t idx) {
    ClientConn& c = *conns_[idx];
    c.abandoned = true;
    c.conn->set_handover_hold(false);
    c.conn->set_ignore_path_change(true);
    result_.fallback_plain = true;
    env_.trace().record(env_.now(), "client", EventKind::handover_fallback, idx);
}

void ClientNode::send_requests(size_t idx) {
    ClientConn& c = *conns_[idx];
    auto request = [&](uint64_t bytes) {
        uint64_t stream = c.conn->open_stream();
        Resource r;
        r.stream_id = stream;
        r.expect = bytes;
        if (cfg_.verify_payload || cfg_.record_payload)
            r.verify_rng = payload_rng(cfg_.seed, c.server_port, stream);
        c.resources.push_back(std::move(r));
        auto [it, fresh] =
            c.tx.try_emplace(stream, c.xads->stream_secret(crypto::Sender::client, stream));
        std::string req = "GET " + std::to_string(bytes) + "\n";
        ByteVec records;
        it->second.seal(ByteSpan(reinterpret_cast<const uint8_t*>(req.data()), req.size()),
                        records);
        c.conn->stream_write(stream, records, false);
        env_.trace().record(env_.now(), "client", EventKind::app_request_sent, idx, stream);
    };
    if (cfg_.workload == Workload::bulk) {
        c.unbounded = cfg_.bulk_total_bytes == 0;
        request(cfg_.bulk_total_bytes);
    } else {
        const HostProfile& host = cfg_.page[idx];
        for (int r = 0; r < host.resources; ++r) request(host.bytes_per_resource);
    }
}

void ClientNode::on_stream_data(size_t idx, uint64_t stream_id, ByteSpan data, bool fin) {
    ClientConn& c = *conns_[idx];
    auto [it, fresh] =
        c.rx.try_emplace(stream_id, c.xads->stream_secret(crypto::Sender::server, stream_id));
    ByteVec plain;
    if (!it->second.feed(data, plain)) {
        result_.payload_ok = false;
        c.conn->close(transport::CloseReason::protocol_error);
        return;
    }
    for (auto& r : c.resources) {
        if (r.stream_id != stream_id) continue;
        if (!plain.empty()) {
            if (r.verify_rng) {
                ByteVec expect = r.verify_rng->bytes(plain.size());
                if (expect != plain) result_.payload_ok = false;
            }
            if (cfg_.record_payload) append(result_.received_payload, plain);
            r.got += plain.size();
            result_.client_received_bytes += plain.size();
        }
        if (fin) r.fin_seen = true;
        break;
    }
    if (fin || !plain.empty()) check_complete(idx);
}

void ClientNode::check_complete(size_t idx) {
    ClientConn& c = *conns_[idx];
    if (c.complete || c.unbounded) return;
    for (const auto& r : c.resources)
        if (!r.done()) return;
    c.complete = true;
    if (all_complete()) {
        result_.transfer_complete = true;
        if (cfg_.workload == Workload::webperf) result_.aplt = env_.now();
        if (cfg_.stop_when_complete) net_.scheduler().request_stop();
    }
}

bool ClientNode::all_complete() const {
    for (const auto& c : conns_)
        if (!c->complete) return false;
    return !conns_.empty();
}

uint64_t ClientNode::total_received() const { return result_.client_received_bytes; }

void ClientNode::on_oob_message(ByteVec msg) {
    auto m = handover::decode_oob(msg);
    if (!m || m->session >= conns_.size()) return;
    ClientConn& c = *conns_[m->session];
    if (c.abandoned) return;
    if (m->type == handover::OobType::smaq_ok) {
        c.ok_received = true;
        env_.trace().record(env_.now(), "client", EventKind::smaq_ok, m->session);
    } else if (m->type == handover::OobType::smaq_error) {
        ++result_.handover_errors;
        env_.trace().record(env_.now(), "client", EventKind::smaq_error,
                            m->payload.empty() ? 0 : m->payload[0]);
        fallback(m->session);
    }
}

void ClientNode::finalize(RunResult& result) {
    // Scan needles: the XADS tree roots and samples of delivered plaintext.
    netem::Rng sampler(netem::Rng::derive(cfg_.seed, "scan/sampler"));
    for (auto& c : conns_) {
        if (!c->xads) continue;
        result.secret_needles.push_back(c->xads->master().bytes);
        for (auto& r : c->resources) {
            result.secret_needles.push_back(
                c->xads->stream_secret(crypto::Sender::server, r.stream_id).bytes);
            result.secret_needles.push_back(
                c->xads->stream_secret(crypto::Sender::client, r.stream_id).bytes);
            if (r.got == 0) continue;
            netem::Rng gen = payload_rng(cfg_.seed, c->server_port, r.stream_id);
            ByteVec prefix = gen.bytes(size_t(std::min<uint64_t>(r.got, 4096)));
            size_t windows = std::min<size_t>(8, prefix.size() / 32);
            result.plaintext_needles.push_back(
                ByteVec(prefix.begin(), prefix.begin() + std::min<size_t>(32, prefix.size())));
            for (size_t w = 0; w + 1 < windows; ++w) {
                size_t off = size_t(sampler.below(prefix.size() - 32));
                result.plaintext_needles.push_back(
                    ByteVec(prefix.begin() + off, prefix.begin() + off + 32));
            }
        }
        result.early_pings += c->conn->early_pings();
    }
}

}  // namespace smaq::sim

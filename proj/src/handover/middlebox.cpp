#include "smaq/handover/middlebox.hpp"

namespace smaq::handover {

using transport::ConnConfig;
using transport::Connection;
using transport::Role;

MboxSession::MboxSession(transport::Env& env, const SmaqState& state,
                         const MboxSessionConfig& cfg)
    : env_(env), cfg_(cfg), state_copy_(state.serialize()) {
    transport::RestoreInfo info = to_restore_info(state);

    ConnConfig ccfg;
    ccfg.role = Role::mbox_client_facing;
    ccfg.local = cfg.client_facing_local;
    ccfg.peer = info.client_addr;
    ccfg.cc = cfg.cc_client_side;
    ccfg.idle_timeout = cfg.idle_timeout;
    ccfg.migration_ping_give_up = cfg.ping_give_up;
    ccfg.label = env.node() + "/cf";
    transport::Callbacks cbs;
    client_facing_ = Connection::restore(env, std::move(ccfg), std::move(cbs), info);

    ConnConfig scfg;
    scfg.role = Role::mbox_server_facing;
    scfg.local = cfg.server_facing_local;
    scfg.peer = info.server_addr;
    scfg.cc = cfg.cc_server_side;
    scfg.idle_timeout = cfg.idle_timeout;
    scfg.migration_ping_give_up = cfg.ping_give_up;
    scfg.label = env.node() + "/sf";
    transport::Callbacks sbs;
    server_facing_ = Connection::restore(env, std::move(scfg), std::move(sbs), info);

    wire_splice(*client_facing_, *server_facing_, false);
    wire_splice(*server_facing_, *client_facing_, true);
    client_facing_->hold_sends_until_peer_activity();
    server_facing_->hold_sends_until_peer_activity();
}

MboxSession::~MboxSession() { erase_state(); }

void MboxSession::wire_splice(Connection& from, Connection& to, bool from_server) {
    // The callbacks structure was set at construction; splice wiring happens
    // through a small shim because both connections must exist first.
    transport::Callbacks cbs;
    Connection* dst = &to;
    cbs.on_stream_data = [this, dst](uint64_t id, ByteSpan data, bool fin) {
        dst->stream_write(id, data, fin);
    };
    if (from_server) {
        cbs.on_handshake_done_frame = [this, dst] {
            ++forwarded_hd_;
            env_.trace().record(env_.now(), env_.node(),
                                netem::EventKind::handshake_done_forwarded);
            dst->send_handshake_done();
        };
    }
    cbs.on_closed = [this](transport::CloseReason) { failed_ = true; };
    from.set_callbacks(std::move(cbs));
}

void MboxSession::start() {
    if (cfg_.ping_client) client_facing_->start_migration_pings();
    if (cfg_.ping_server) server_facing_->start_migration_pings();
}

void MboxSession::start_server_side_pings() { server_facing_->start_migration_pings(); }

void MboxSession::on_datagram(const Datagram& dg) {
    if (dg.dst.port == cfg_.client_facing_local.port) {
        client_facing_->on_datagram(dg);
    } else if (dg.dst.port == cfg_.server_facing_local.port) {
        server_facing_->on_datagram(dg);
    }
}

bool MboxSession::owns_port(uint16_t port) const {
    return port == cfg_.client_facing_local.port || port == cfg_.server_facing_local.port;
}

uint64_t MboxSession::splice_buffer_bytes() const {
    return client_facing_->splice_buffer_bytes() + server_facing_->splice_buffer_bytes();
}

void MboxSession::append_held_bytes(ByteVec& out) const {
    append(out, state_copy_);
    client_facing_->append_held_bytes(out);
    server_facing_->append_held_bytes(out);
}

void MboxSession::erase_state() {
    if (state_copy_.empty()) return;
    std::fill(state_copy_.begin(), state_copy_.end(), uint8_t{0});
    state_copy_.clear();
    env_.trace().record(env_.now(), env_.node(), netem::EventKind::state_erased);
}

}  // namespace smaq::handover

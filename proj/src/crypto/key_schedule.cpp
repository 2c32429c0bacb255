#include "smaq/crypto/key_schedule.hpp"

#include <stdexcept>

#include "smaq/kernels/kernels.hpp"

namespace smaq::crypto {

Secret::Secret(ByteVec b, std::string p) : bytes(std::move(b)), path(std::move(p)) {
    if (bytes.size() != kHashLen) throw std::invalid_argument("secret: bad length");
}

TransportKeys derive_transport_keys(ByteSpan client_random, ByteSpan server_random) {
    ByteVec transcript;
    append(transcript, client_random);
    append(transcript, server_random);
    uint8_t thash[32];
    kernels::sha256(transcript.data(), transcript.size(), thash);
    ByteSpan th(thash, 32);

    static constexpr std::string_view kSalt = "smaq handshake v1";
    ByteVec salt(kSalt.begin(), kSalt.end());
    ByteVec root = hkdf_extract(salt, transcript);

    TransportKeys keys;
    keys.client_traffic = Secret(hkdf_expand_label(root, "c ap traffic", th, kHashLen),
                                 "transport/client/traffic/phase0");
    keys.server_traffic = Secret(hkdf_expand_label(root, "s ap traffic", th, kHashLen),
                                 "transport/server/traffic/phase0");
    keys.client_hp =
        Secret(hkdf_expand_label(keys.client_traffic.bytes, "quic hp", {}, kHashLen),
               "transport/client/hp");
    keys.server_hp =
        Secret(hkdf_expand_label(keys.server_traffic.bytes, "quic hp", {}, kHashLen),
               "transport/server/hp");
    keys.exporter_master =
        Secret(hkdf_expand_label(root, "exp master", th, kHashLen), "transport/exporter");
    return keys;
}

PacketKeys derive_packet_keys(const Secret& traffic_secret) {
    PacketKeys out;
    out.key = hkdf_expand_label(traffic_secret.bytes, "quic key", {}, 16);
    out.iv = hkdf_expand_label(traffic_secret.bytes, "quic iv", {}, 12);
    return out;
}

Secret derive_xads_master(const Secret& exporter_master_secret) {
    // TLS keying material exporter: Derive-Secret(exporter_master, label, ""),
    // then expansion with the hash of the (empty) exporter context.
    uint8_t empty_hash[32];
    kernels::sha256(nullptr, 0, empty_hash);
    ByteSpan eh(empty_hash, 32);
    ByteVec derived =
        hkdf_expand_label(exporter_master_secret.bytes, "EXPORTER-smaq-xads-master", eh, kHashLen);
    ByteVec out = hkdf_expand_label(derived, "exporter", eh, kHashLen);
    return Secret(std::move(out), "xads/master");
}

Secret derive_stream_secret(const Secret& master, Sender sender, uint64_t stream_id) {
    if (stream_id > kMaxStreamId)
        throw std::invalid_argument("derive_stream_secret: stream id out of range");
    std::string label = std::string("xse ") + sender_name(sender) + " " + std::to_string(stream_id);
    ByteVec bytes = hkdf_expand_label(master.bytes, label, {}, kHashLen);
    std::string path = std::string("xads/") + sender_name(sender) + "/" +
                       std::to_string(stream_id) + "/phase0";
    return Secret(std::move(bytes), std::move(path));
}

Secret key_update(const Secret& current) {
    ByteVec bytes = hkdf_expand_label(current.bytes, "xse upd", {}, kHashLen);
    std::string path = current.path;
    auto pos = path.rfind("/phase");
    uint64_t phase = 0;
    if (pos != std::string::npos) {
        phase = std::stoull(path.substr(pos + 6));
        if (phase == UINT64_MAX) throw std::overflow_error("key_update: phase counter overflow");
        path = path.substr(0, pos);
    }
    path += "/phase" + std::to_string(phase + 1);
    return Secret(std::move(bytes), std::move(path));
}

const Secret& XadsKeySchedule::stream_secret(Sender sender, uint64_t stream_id) {
    auto key = std::make_pair(static_cast<uint8_t>(sender), stream_id);
    auto it = lanes_.find(key);
    if (it == lanes_.end()) {
        Lane lane;
        lane.secret = derive_stream_secret(master_, sender, stream_id);
        lane.phase = 0;
        it = lanes_.emplace(key, std::move(lane)).first;
    }
    return it->second.secret;
}

uint64_t XadsKeySchedule::phase(Sender sender, uint64_t stream_id) const {
    auto it = lanes_.find(std::make_pair(static_cast<uint8_t>(sender), stream_id));
    return it == lanes_.end() ? 0 : it->second.phase;
}

void XadsKeySchedule::update(Sender sender, uint64_t stream_id) {
    stream_secret(sender, stream_id);  // materialize phase 0 if needed
    auto& lane = lanes_.at(std::make_pair(static_cast<uint8_t>(sender), stream_id));
    lane.secret = key_update(lane.secret);
    ++lane.phase;
}

}  // namespace smaq::crypto

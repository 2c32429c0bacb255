// Regenerates tests/vectors/xads_schedule.txt from the key-derivation code.
// The file is checked in; this tool exists to rebuild it deliberately after
// an intentional schedule change, never from CI.

#include <cstdio>

#include "smaq/bytes.hpp"
#include "smaq/crypto/key_schedule.hpp"

using namespace smaq;
using namespace smaq::crypto;

int main() {
    Secret exporter(ByteVec(32, 0), "exporter");
    Secret master = derive_xads_master(exporter);
    Secret c0 = derive_stream_secret(master, Sender::client, 0);
    Secret s0 = derive_stream_secret(master, Sender::server, 0);
    Secret c4 = derive_stream_secret(master, Sender::client, 4);
    Secret c0p1 = key_update(c0);
    Secret c0p2 = key_update(c0p1);

    printf("# XADS key schedule golden vectors.\n");
    printf("# Derivation root: all-zero 32-octet exporter master secret.\n");
    printf("\ncase zero_exporter\n");
    printf("exporter %s\n", to_hex(exporter.bytes).c_str());
    printf("xads_master %s\n", to_hex(master.bytes).c_str());
    printf("client_xse_0_secret_0 %s\n", to_hex(c0.bytes).c_str());
    printf("server_xse_0_secret_0 %s\n", to_hex(s0.bytes).c_str());
    printf("client_xse_4_secret_0 %s\n", to_hex(c4.bytes).c_str());
    printf("client_xse_0_secret_1 %s\n", to_hex(c0p1.bytes).c_str());
    printf("client_xse_0_secret_2 %s\n", to_hex(c0p2.bytes).c_str());
    return 0;
}

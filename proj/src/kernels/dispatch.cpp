#include <cstdlib>
#include <cstring>

#include "smaq/kernels/kernels.hpp"

#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace smaq::kernels {

const KernelTable& scalar_table() {
    static const KernelTable t{
        "scalar",          sha256_compress_scalar, aes128_block_scalar,
        aes128_ctr_xor_scalar, ghash_update_scalar, xor_bytes_scalar,
    };
    return t;
}

CpuFeatures detect_cpu() {
    CpuFeatures f;
#if defined(__x86_64__)
    unsigned eax, ebx, ecx, edx;
    if (__get_cpuid(1, &eax, &ebx, &ecx, &edx)) {
        f.aesni = ecx & (1u << 25);
        f.pclmul = ecx & (1u << 1);
    }
    if (__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) {
        f.avx2 = ebx & (1u << 5);
        f.sha = ebx & (1u << 29);
    }
#endif
    return f;
}

#if defined(__x86_64__)
bool x86_variants_available() {
    CpuFeatures f = detect_cpu();
    return f.aesni && f.pclmul;
}
#endif

namespace {

KernelTable build_active() {
    KernelTable t = scalar_table();
    const char* force = std::getenv("SMAQ_KERNELS");
    if (force != nullptr && std::strcmp(force, "scalar") == 0) return t;
#if defined(__x86_64__)
    CpuFeatures f = detect_cpu();
    bool any = false;
    if (f.aesni) {
        t.aes128_block = aes128_block_aesni;
        t.aes128_ctr_xor = aes128_ctr_xor_aesni;
        any = true;
    }
    if (f.pclmul) {
        t.ghash_update = ghash_update_clmul;
        any = true;
    }
    if (f.sha) {
        t.sha256_compress = sha256_compress_shani;
        any = true;
    }
    if (f.avx2) {
        t.xor_bytes = xor_bytes_avx2;
        any = true;
    }
    if (any) t.name = "x86";
#endif
    return t;
}

}  // namespace

const KernelTable& active() {
    static const KernelTable t = build_active();
    return t;
}

}  // namespace smaq::kernels

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "uqac/simd/kernels.hpp"

namespace uqac::simd {

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;  // baseline on AArch64
#else
            return false;
#endif
    }
    return false;
}

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("SIMD target not supported on this host: " + std::string(isa_name(isa)));
    }
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2: return detail::avx2_table();
#endif
#if defined(__aarch64__)
        case Isa::neon: return detail::neon_table();
#endif
        default: return detail::scalar_table();
    }
}

namespace {

const KernelTable& select_best() {
    if (const char* forced = std::getenv("UQAC_SIMD")) {
        const std::string name(forced);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
            if (name == isa_name(isa) && isa_supported(isa)) return kernels_for(isa);
        }
    }
    for (Isa isa : {Isa::avx2, Isa::neon}) {
        if (isa_supported(isa)) return kernels_for(isa);
    }
    return detail::scalar_table();
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& active = select_best();
    return active;
}

}  // namespace uqac::simd

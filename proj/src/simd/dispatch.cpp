#include <atomic>
#include <cassert>

#include "fracctl/simd/kernels.hpp"

namespace fracctl::simd {

namespace {

bool available(Isa isa) {
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
            return true;
#else
            return false;
#endif
    }
    return false;
}

std::atomic<Isa>& selected() {
    static std::atomic<Isa> isa{detect_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
        case Isa::neon:
            return "neon";
    }
    return "unknown";
}

Isa detect_isa() {
    if (available(Isa::avx2)) return Isa::avx2;
    if (available(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

bool set_active_isa(Isa isa) {
    if (!available(isa)) return false;
    selected().store(isa, std::memory_order_relaxed);
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    switch (active_isa()) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2:
            return avx2::dot(a.data(), b.data(), a.size());
#endif
#if defined(__aarch64__)
        case Isa::neon:
            return neon::dot(a.data(), b.data(), a.size());
#endif
        default:
            return scalar::dot(a.data(), b.data(), a.size());
    }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    switch (active_isa()) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2:
            avx2::axpy(alpha, x.data(), y.data(), x.size());
            return;
#endif
#if defined(__aarch64__)
        case Isa::neon:
            neon::axpy(alpha, x.data(), y.data(), x.size());
            return;
#endif
        default:
            scalar::axpy(alpha, x.data(), y.data(), x.size());
    }
}

}  // namespace fracctl::simd

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops of the history convolutions. Every kernel has a scalar
// reference implementation; vector variants are selected once at runtime.

namespace fracctl::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by this build and this CPU.
Isa detect_isa();

/// Instruction set currently used by the dispatching entry points.
Isa active_isa();

/// Force a particular variant (tests and benchmarks). Returns false, leaving the
/// selection unchanged, when the variant is unavailable.
bool set_active_isa(Isa isa);

/// sum_i a[i] * b[i]; a and b must have equal length.
double dot(std::span<const double> a, std::span<const double> b);

/// y[i] += alpha * x[i]; x and y must have equal length.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace neon
#endif

}  // namespace fracctl::simd

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Dense double-precision kernels used by the network, trainer and theory
// code. Every kernel has a portable scalar reference implementation and an
// AVX2+FMA variant; the variant is chosen once at startup from CPUID and can
// be forced with set_isa() or the PLAB_ISA environment variable
// ("scalar" | "avx2").

namespace plab::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;
Isa parse_isa(std::string_view name);

/// ISA currently used by the dispatching entry points.
Isa active_isa() noexcept;

/// Best ISA supported by this CPU and this build.
Isa best_supported_isa() noexcept;

/// Selects the kernels. Throws if `isa` is not supported on this machine.
void set_isa(Isa isa);

double dot(std::span<const double> x, std::span<const double> y);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

/// C (m x n, row stride ldc) = beta * C + alpha * A^T B, where A is stored
/// k x m (row stride lda) and B is stored k x n (row stride ldb).
/// beta == 0 overwrites C without reading it.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc);

/// One lazy-training step over a row of n pre-activations:
///   f[k] += alpha * phi(h[k]);  h[k] += c * p[k]
/// with phi(x) = max(gamma x, x) evaluated on the old h[k]. Every k with
/// (old h[k] > 0) != active[k] is written to `flips` (capacity n) in
/// increasing order; returns their count.
std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips);

// Direct access to one implementation, for equivalence tests and benchmarks.
namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc);
std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips);
}  // namespace scalar

namespace avx2 {
bool compiled() noexcept;
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc);
std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips);
}  // namespace avx2

}  // namespace plab::simd

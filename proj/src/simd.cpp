#include "plab/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "plab/error.hpp"

namespace plab::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  Isa isa = best_supported_isa();
  if (const char* env = std::getenv("PLAB_ISA"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (requested == Isa::scalar || requested == isa) isa = requested;
  }
  return isa;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  fail(ErrorKind::invalid_argument, "unknown ISA '" + std::string(name) + "'");
}

Isa best_supported_isa() noexcept {
  static const bool avx2_ok = avx2::compiled() && cpu_has_avx2();
  return avx2_ok ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  require(isa == Isa::scalar || best_supported_isa() == Isa::avx2, ErrorKind::invalid_argument,
          "AVX2 kernels are not available on this machine");
  current().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::dimension_mismatch, "dot: length mismatch");
  return active_isa() == Isa::avx2 ? avx2::dot(x.data(), y.data(), x.size())
                                   : scalar::dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), ErrorKind::dimension_mismatch, "axpy: length mismatch");
  if (active_isa() == Isa::avx2) {
    avx2::axpy(a, x.data(), y.data(), x.size());
  } else {
    scalar::axpy(a, x.data(), y.data(), x.size());
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc) {
  if (active_isa() == Isa::avx2) {
    avx2::gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips) {
  return active_isa() == Isa::avx2 ? avx2::row_step(n, h, p, active, c, alpha, gamma, f, flips)
                                   : scalar::row_step(n, h, p, active, c, alpha, gamma, f, flips);
}

}  // namespace plab::simd

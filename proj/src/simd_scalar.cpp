// Portable reference kernels. These define the semantics the vector
// variants are tested against; keep them as plain loops.

#include "plab/simd.hpp"

namespace plab::simd::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
      double& out = c[i * ldc + j];
      out = beta == 0.0 ? alpha * s : beta * out + alpha * s;
    }
  }
}

std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double old = h[k];
    const bool on = old > 0.0;
    f[k] += alpha * (on ? old : gamma * old);
    h[k] = old + c * p[k];
    if (on != (active[k] != 0)) flips[count++] = static_cast<std::uint32_t>(k);
  }
  return count;
}

}  // namespace plab::simd::scalar

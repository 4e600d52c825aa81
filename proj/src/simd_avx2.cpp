// AVX2 + FMA kernels. Functions carry target attributes instead of the whole
// translation unit being built with -mavx2, so no AVX2 code can leak into
// inline functions shared with the scalar path.

#include "plab/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define PLAB_HAVE_AVX2 1
#include <immintrin.h>
#endif

namespace plab::simd::avx2 {

#ifdef PLAB_HAVE_AVX2

#define PLAB_AVX2 __attribute__((target("avx2,fma")))

bool compiled() noexcept { return true; }

PLAB_AVX2 static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

PLAB_AVX2 double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

PLAB_AVX2 void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;

// acc(4x8) = sum_p A[p, i..i+3] * B[p, j..j+7], then C = first ? beta*C + alpha*acc : C + alpha*acc.
PLAB_AVX2 void micro_4x8(std::size_t kc, const double* a, std::size_t lda, const double* b,
                         std::size_t ldb, double alpha, double beta, bool overwrite, double* c,
                         std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < kc; ++p) {
    const double* bp = b + p * ldb;
    const double* ap = a + p * lda;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(ap);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(ap + 1);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(ap + 2);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(ap + 3);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  const __m256d valpha = _mm256_set1_pd(alpha);
  const __m256d vbeta = _mm256_set1_pd(beta);
  __m256d rows[kMr][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}};
  for (std::size_t r = 0; r < kMr; ++r) {
    double* cr = c + r * ldc;
    for (std::size_t h = 0; h < 2; ++h) {
      __m256d acc = _mm256_mul_pd(valpha, rows[r][h]);
      if (overwrite) {
        if (beta != 0.0) acc = _mm256_fmadd_pd(vbeta, _mm256_loadu_pd(cr + 4 * h), acc);
      } else {
        acc = _mm256_add_pd(_mm256_loadu_pd(cr + 4 * h), acc);
      }
      _mm256_storeu_pd(cr + 4 * h, acc);
    }
  }
}

void edge(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1, std::size_t kc,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double alpha,
          double beta, bool overwrite, double* c, std::size_t ldc) {
  for (std::size_t i = i0; i < i1; ++i) {
    for (std::size_t j = j0; j < j1; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < kc; ++p) s += a[p * lda + i] * b[p * ldb + j];
      double& out = c[i * ldc + j];
      if (overwrite) {
        out = beta == 0.0 ? alpha * s : beta * out + alpha * s;
      } else {
        out += alpha * s;
      }
    }
  }
}

}  // namespace

PLAB_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
                       std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                       std::size_t ldc) {
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == 0.0 ? 0.0 : beta * c[i * ldc + j];
    return;
  }
  const std::size_t m_main = m - m % kMr;
  const std::size_t n_main = n - n % kNr;
  for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
    const std::size_t kc = k - p0 < kKc ? k - p0 : kKc;
    const bool overwrite = p0 == 0;
    const double* ak = a + p0 * lda;
    const double* bk = b + p0 * ldb;
    for (std::size_t j = 0; j < n_main; j += kNr) {
      for (std::size_t i = 0; i < m_main; i += kMr) {
        micro_4x8(kc, ak + i, lda, bk + j, ldb, alpha, beta, overwrite, c + i * ldc + j, ldc);
      }
    }
    edge(m_main, m, 0, n, kc, ak, lda, bk, ldb, alpha, beta, overwrite, c, ldc);
    edge(0, m_main, n_main, n, kc, ak, lda, bk, ldb, alpha, beta, overwrite, c, ldc);
  }
}

PLAB_AVX2 std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                               double c, double alpha, double gamma, double* f, std::uint32_t* flips) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vg = _mm256_set1_pd(gamma);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t count = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d old = _mm256_loadu_pd(h + k);
    const __m256d on = _mm256_cmp_pd(old, zero, _CMP_GT_OQ);
    const __m256d act = _mm256_blendv_pd(_mm256_mul_pd(vg, old), old, on);
    _mm256_storeu_pd(f + k, _mm256_fmadd_pd(va, act, _mm256_loadu_pd(f + k)));
    _mm256_storeu_pd(h + k, _mm256_fmadd_pd(vc, _mm256_loadu_pd(p + k), old));
    const int on_bits = _mm256_movemask_pd(on);
    const int was_bits = (active[k] != 0) | (active[k + 1] != 0) << 1 | (active[k + 2] != 0) << 2 |
                         (active[k + 3] != 0) << 3;
    int diff = on_bits ^ was_bits;
    while (diff != 0) {
      const int b = __builtin_ctz(diff);
      flips[count++] = static_cast<std::uint32_t>(k + b);
      diff &= diff - 1;
    }
  }
  for (; k < n; ++k) {
    const double old = h[k];
    const bool on = old > 0.0;
    f[k] += alpha * (on ? old : gamma * old);
    h[k] = old + c * p[k];
    if (on != (active[k] != 0)) flips[count++] = static_cast<std::uint32_t>(k);
  }
  return count;
}

#else

bool compiled() noexcept { return false; }
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
             std::size_t ldc) {
  scalar::gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
std::size_t row_step(std::size_t n, double* h, const double* p, const std::uint8_t* active,
                     double c, double alpha, double gamma, double* f, std::uint32_t* flips) {
  return scalar::row_step(n, h, p, active, c, alpha, gamma, f, flips);
}

#endif

}  // namespace plab::simd::avx2
